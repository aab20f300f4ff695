"""Command-line front end.

    steklov spectrum --family euclidean --n 3 --R 1 --kmax 3
    steklov verify   --family plateau_h0 --R 1 --eps 1e-3 --h0 1 --kmax 2 --out report.csv
    steklov sweep    --family A_large --n 4 --k 1 --out sweep.csv --plot
    steklov rayleigh --family euclidean --n 3 --R 1 --k 1 --trial cutoff --delta 0.1
    steklov validate --config profile.json

Exit status: 0 success, 1 a bound verdict failed, 2 malformed input or a
profile that fails validation, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .fem import AssemblyError, MeshError
from .modal import SolverInconsistencyError, assemble_spectrum, format_number, sphere_eigenvalue
from .profile import ProfileError, profile_from_spec, validate_profile
from .shoot import ShootError, SolverOptions, cutoff_trial, piecewise_linear_trial, rayleigh, steklov_mode
from .sweep import default_grid, fit_trend, sweep_family, sweep_to_csv, sweep_to_svg
from .theorems import _map, default_workers, n2_exact, verify_profile

EXIT_OK, EXIT_VERDICT, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3
COMMANDS = ("spectrum", "verify", "sweep", "rayleigh", "validate")


class ConfigError(ValueError):
    pass


def _load_json(text_or_path: str) -> dict:
    text = text_or_path.strip()
    if not text.startswith("{"):
        path = Path(text_or_path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {text_or_path}")
        text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _parse_knots(text: str) -> list[list[float]]:
    """``"0:1,0.5:2"`` or a JSON list of pairs."""
    text = text.strip()
    if text.startswith("["):
        return json.loads(text)
    out = []
    for item in text.split(","):
        try:
            r, v = item.split(":")
            out.append([float(r), float(v)])
        except ValueError:
            raise ConfigError(f"bad knot {item!r}; expected r:value") from None
    return out


def _merged_config(args) -> dict:
    cfg = _load_json(args.config) if args.config else {}
    cfg = dict(cfg)
    spec = dict(cfg.get("profile") or {})
    if args.profile:
        spec = _load_json(args.profile)
    params = dict(spec.get("params") or {})
    for key in ("family", "n", "R"):
        val = getattr(args, key)
        if val is not None:
            spec[key] = val
    for key in ("eps", "h0", "R1", "C1", "C2", "tail"):
        val = getattr(args, key, None)
        if val is not None and not (key == "eps" and args.command == "sweep"):
            params[key] = val
    if args.knots:
        spec["knots"] = _parse_knots(args.knots)
    if "family" in spec:
        spec.setdefault("R", 1.0)
    spec["params"] = params
    cfg["profile"] = spec
    solver = dict(cfg.get("solver") or {})
    for key, attr in (("rtol", "rtol"), ("atol", "atol"), ("fem_N", "fem_n"), ("method", "method")):
        val = getattr(args, attr)
        if val is not None:
            solver[key] = val
    cfg["solver"] = solver
    for key in ("kmax", "k"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _options(cfg: dict) -> SolverOptions:
    solver = cfg.get("solver") or {}
    unknown = set(solver) - {"rtol", "atol", "fem_N", "method", "max_steps", "max_refine"}
    if unknown:
        raise ConfigError(f"unknown solver options {sorted(unknown)}")
    try:
        return SolverOptions(**solver)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _profile(cfg: dict, validate: bool = True):
    spec = cfg["profile"]
    if "family" not in spec:
        raise ConfigError("no profile given: use --family/--n/--R, --profile or --config")
    prof = profile_from_spec(spec)
    if validate:
        report = validate_profile(prof)
        if not report.passed:
            raise ProfileError(f"profile fails validation: {', '.join(report.failed())}")
    return prof


def _write(path: Path, text: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _out(args, text: str) -> None:
    if args.out:
        _write(Path(args.out), text)
    else:
        sys.stdout.write(text)


def _workers(args) -> int:
    return args.workers if args.workers else default_workers()


# ---------------------------------------------------------------------------
# commands


def cmd_spectrum(args, cfg) -> int:
    prof = _profile(cfg)
    k_max = int(cfg.get("kmax", 3))
    if k_max < 1:
        raise ConfigError("kmax must be >= 1")
    if prof.n == 2:
        sigmas = [(k, n2_exact(k, float(prof.h0))) for k in range(k_max + 1)]
    else:
        opts = _options(cfg)
        vals = _map(lambda k: steklov_mode(prof, sphere_eigenvalue(prof.n, k), opts),
                    list(range(1, k_max + 1)), _workers(args))
        sigmas = [(0, 0.0)] + list(zip(range(1, k_max + 1), vals))
    table = assemble_spectrum(prof, sigmas, k_max)
    _out(args, table.to_csv())
    return EXIT_OK


def cmd_verify(args, cfg) -> int:
    prof = _profile(cfg)
    params = cfg["profile"].get("params", {})
    caps = {key: params.get(key) for key in ("R1", "C1", "C2")}
    report = verify_profile(prof, int(cfg.get("kmax", 3)), _options(cfg),
                            crosscheck=args.crosscheck, workers=_workers(args), **caps)
    if args.out:
        out = Path(args.out)
        _write(out, report.to_csv())
        _write(Path(args.json) if args.json else out.with_suffix(".json"), report.to_json() + "\n")
    else:
        if args.json:
            _write(Path(args.json), report.to_json() + "\n")
        sys.stdout.write(report.to_csv())
    if report.indeterminate:
        print(f"solver failures: {report.metadata.get('solver_errors')}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK if report.passed else EXIT_VERDICT


def cmd_sweep(args, cfg) -> int:
    spec = cfg["profile"]
    family = spec.get("family")
    if family is None:
        raise ConfigError("sweep needs --family (A_large, B_small or C_h0)")
    n = int(spec.get("n", 4))
    R = float(spec.get("R", 1.0))
    h0 = float(spec.get("params", {}).get("h0", 1.0))
    if args.eps:
        grid = _parse_floats(args.eps)
    elif "eps_grid" in cfg:
        grid = [float(e) for e in cfg["eps_grid"]]
    else:
        grid, note = default_grid(family, R)
        if note:
            print(note, file=sys.stderr)
    rows = sweep_family(family, n, int(cfg.get("k", 1)), R, grid, h0, _options(cfg),
                        crosscheck=not args.no_crosscheck, workers=_workers(args))
    _out(args, sweep_to_csv(rows))
    if args.plot:
        if isinstance(args.plot, str):
            svg_path = Path(args.plot)
        elif args.out:
            svg_path = Path(args.out).with_suffix(".svg")
        else:
            svg_path = Path("sweep.svg")
        _write(svg_path, sweep_to_svg(rows, "ratio"))
    good = [r for r in rows if r.ok]
    if len(good) >= 3:
        fit = fit_trend(good, "ratio")
        print(f"ratio trend: monotone={fit.monotone} limit={format_number(fit.limit_estimate)} "
              f"rate={format_number(fit.rate_estimate)}", file=sys.stderr)
    if any(not r.ok for r in rows):
        return EXIT_SOLVER
    if any(r.status == "bound_violation" for r in rows):
        return EXIT_VERDICT
    return EXIT_OK


def cmd_rayleigh(args, cfg) -> int:
    prof = _profile(cfg)
    if args.lam is not None:
        lam = float(args.lam)
    else:
        lam = float(sphere_eigenvalue(prof.n, int(cfg.get("k", 1))))
    if args.trial == "cutoff":
        delta = args.delta if args.delta is not None else 0.1 * prof.R
        a, da, kinks = cutoff_trial(prof.R, delta)
    else:
        if not args.trial_knots:
            raise ConfigError("--trial piecewise needs --trial-knots")
        a, da, kinks = piecewise_linear_trial(_parse_knots(args.trial_knots))
    value = rayleigh(prof, lam, a, da, kinks=kinks)
    print(format_number(value))
    return EXIT_OK


def cmd_validate(args, cfg) -> int:
    prof = _profile(cfg, validate=False)
    report = validate_profile(prof)
    _out(args, json.dumps(report.to_dict(), indent=2, sort_keys=True, default=float) + "\n")
    return EXIT_OK if report.passed else EXIT_INPUT


HANDLERS = {
    "spectrum": cmd_spectrum,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "rayleigh": cmd_rayleigh,
    "validate": cmd_validate,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits 2 already; keep the message short
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("profile")
    g.add_argument("--config", help="JSON run configuration (file path or inline object)")
    g.add_argument("--profile", help="JSON profile spec (file path or inline object)")
    g.add_argument("--family", help="euclidean, plateau_large (A_large), plateau_small (B_small), "
                                    "plateau_h0 (C_h0), capped, piecewise")
    g.add_argument("--n", type=int, help="manifold dimension")
    g.add_argument("--R", type=float, help="length of the profile interval")
    g.add_argument("--eps", help="plateau parameter (sweep: comma-separated grid)")
    g.add_argument("--h0", type=float, help="boundary value h(0) for plateau_h0")
    g.add_argument("--R1", type=float)
    g.add_argument("--C1", type=float)
    g.add_argument("--C2", type=float)
    g.add_argument("--tail", type=float, help="length of the cone tail for knot profiles")
    g.add_argument("--knots", help='knots "r:h,r:h,..." for capped/piecewise profiles')
    s = common.add_argument_group("solver")
    s.add_argument("--rtol", type=float)
    s.add_argument("--atol", type=float)
    s.add_argument("--fem-n", type=int, dest="fem_n")
    s.add_argument("--method", choices=("riccati", "linear"))
    s.add_argument("--workers", type=int, help="worker threads (default: $STEKLOV_THREADS or 1)")
    common.add_argument("--out", help="output path (default: standard output)")

    parser = _Parser(prog="steklov", description="Steklov spectra of revolution metrics on the ball")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("spectrum", parents=[common], help="per-mode Steklov values as CSV")
    p.add_argument("--kmax", type=int)
    p = sub.add_parser("verify", parents=[common], help="check every applicable bound")
    p.add_argument("--kmax", type=int)
    p.add_argument("--json", help="JSON report path (default: next to --out)")
    p.add_argument("--crosscheck", action="store_true", help="recompute every mode by finite elements")
    p = sub.add_parser("sweep", parents=[common], help="eps sweep over a plateau family")
    p.add_argument("--k", type=int)
    p.add_argument("--plot", nargs="?", const=True, help="write an SVG of ratio against log10 eps")
    p.add_argument("--no-crosscheck", action="store_true")
    p = sub.add_parser("rayleigh", parents=[common], help="Rayleigh quotient of a trial function")
    p.add_argument("--k", type=int)
    p.add_argument("--lambda", type=float, dest="lam")
    p.add_argument("--trial", choices=("cutoff", "piecewise"), default="cutoff")
    p.add_argument("--delta", type=float, help="cutoff width")
    p.add_argument("--trial-knots", help='"r:a,..." knots of a piecewise-linear trial function')
    sub.add_parser("validate", parents=[common], help="validation report as JSON")
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.eps is not None and args.command != "sweep":
        try:
            args.eps = float(args.eps)
        except ValueError:
            print(f"steklov: --eps must be a number, got {args.eps!r}", file=sys.stderr)
            return EXIT_INPUT
    try:
        cfg = _merged_config(args)
        return HANDLERS[args.command](args, cfg)
    except (ShootError, AssemblyError, SolverInconsistencyError, FloatingPointError) as exc:
        print(f"steklov: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, ProfileError, MeshError, ValueError, KeyError, TypeError, OSError) as exc:
        print(f"steklov: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

"""Command-line interface: ``plasma-peaks <command> [options]``.

Results go to stdout (or ``--out``) as JSON with a ``config`` block that
re-parses to the :class:`RunConfig` used; the ``sweep-gamma`` table is CSV.
Exit status is 0 on success, 1 when ``verify`` reports a failed check,
2 on invalid input and 3 on numerical failure.
"""

import argparse
import csv
from dataclasses import asdict, dataclass, field
import io
import json
import math
import os
from pathlib import Path
import sys
import time

import numpy as np

from . import _kernels
from .ansatz import (ansatz_energy, build_ansatz, error_term, reduced_energy_expansion,
                     verify_level_sets)
from .domain import DomainModel
from .errors import ConfigurationError, NumericalError, ParameterError, ValidationError
from .greens import GreensTable, boundary_extremizer, harmonic_center
from .routh import PeakConfig, default_delta, hamiltonian_gradient, minimize_hamiltonian
from .solver import check_resolution, connected_components, plasma_eigenvalue, solve_pde
from .sweep import gamma_sweep
from .verify import SUITES, Context, run_suite

EXIT_OK, EXIT_FAILED, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2, 3
SIG_DIGITS = 12
MIN_GRID_N = 65
VALUE_FLAGS = ("--z", "--x", "--z1", "--z2", "--gamma", "--epsilon", "--gammas")


@dataclass
class RunConfig:
    """Everything that determines a run's output."""

    command: str
    domain: dict = field(default_factory=lambda: {"type": "disk", "radius": 1.0})
    grid_n: int = 257
    r_factor: float = 1.1
    gamma: float = None
    epsilon: object = None
    z1: tuple = None
    z2: tuple = None
    tol: float = 1e-10
    seed: int = 0
    threads: int = 1
    outputs: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    def validate(self):
        if self.grid_n < MIN_GRID_N:
            raise ParameterError(f"grid_n must be at least {MIN_GRID_N}")
        if not self.r_factor > 1:
            raise ParameterError("r_factor must exceed 1")
        if self.gamma is not None and not self.gamma > 0:
            raise ParameterError("gamma must be positive")
        eps = self.epsilon if isinstance(self.epsilon, list) else [self.epsilon]
        if any(e is not None and not e > 0 for e in eps):
            raise ParameterError("epsilon must be positive")
        if (self.z1 is None) != (self.z2 is None):
            raise ConfigurationError("give both --z1 and --z2 or neither")
        if self.threads < 1:
            raise ParameterError("threads must be at least 1")
        return self

    def to_dict(self):
        d = asdict(self)
        for key in ("z1", "z2"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("z1", "z2"):
            if d.get(key) is not None:
                d[key] = tuple(float(v) for v in d[key])
        return cls(**d)


# ---------------------------------------------------------------------------
# Output formatting
# ---------------------------------------------------------------------------


def _clean(obj):
    """Round floats to 12 significant digits; numpy scalars and arrays become Python types."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float(f"{x:.{SIG_DIGITS}g}")
    return obj


def to_json(payload):
    return json.dumps(_clean(payload), indent=2, sort_keys=False, ensure_ascii=False) + "\n"


def _write(text, path):
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _fmt(x):
    return f"{float(x):.{SIG_DIGITS}g}"


def _log(msg):
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _point(text):
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected 'x,y', got {text!r}") from exc
    return (x, y)


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def parse_domain(text):
    """``disk``, ``disk:RADIUS``, ``ellipse:A,B``, inline JSON or a JSON file path."""
    text = text.strip()
    if text == "disk":
        return {"type": "disk", "radius": 1.0}
    if text.startswith("disk:"):
        return {"type": "disk", "radius": float(text[5:])}
    if text.startswith("ellipse:"):
        a, b = _float_list(text[8:])
        return {"type": "ellipse", "semi_x": a, "semi_y": b}
    if text.startswith("{"):
        return json.loads(text)
    path = Path(text)
    if not path.is_file():
        raise ParameterError(f"domain {text!r} is neither a known shape nor a file")
    return json.loads(path.read_text(encoding="utf-8"))


def _default_threads():
    env = os.environ.get("PLASMA_PEAKS_THREADS")
    return int(env) if env else 1


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--domain", default="disk",
                        help="disk, disk:R, ellipse:A,B, inline JSON or a JSON domain file")
    common.add_argument("--grid-n", type=int, default=257, help="grid nodes per side")
    common.add_argument("--r-factor", type=float, default=1.1, help="R = r_factor * diam")
    common.add_argument("--seed", type=int, default=0, help="multistart jitter seed")
    common.add_argument("--threads", type=int, default=None,
                        help="parallelism cap (default $PLASMA_PEAKS_THREADS or 1)")
    common.add_argument("--tol", type=float, default=1e-10, help="Newton residual tolerance")
    common.add_argument("--out", default=None, help="write the result here instead of stdout")

    parser = argparse.ArgumentParser(prog="plasma-peaks", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("greens", parents=[common], help="Green's function data at a source")
    p.add_argument("--z", type=_point, required=True, help="source point x,y")
    p.add_argument("--x", type=_point, default=None, help="evaluation point x,y")
    p.add_argument("--method", choices=("closed-form-disk", "grid-solve"), default=None)

    sub.add_parser("harmonic-center", parents=[common], help="minimiser of the Robin function")

    p = sub.add_parser("minimize", parents=[common], help="minimise H_gamma")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--starts", type=int, default=16)

    for name, hlp in (("ansatz", "assemble W_eps and its diagnostics"),
                      ("solve", "solve the free-boundary problem")):
        p = sub.add_parser(name, parents=[common], help=hlp)
        p.add_argument("--gamma", type=float, required=True)
        p.add_argument("--epsilon", type=float, required=True)
        p.add_argument("--z1", type=_point, default=None)
        p.add_argument("--z2", type=_point, default=None)
        p.add_argument("--minimize", action="store_true",
                       help="place the peaks at the H_gamma minimiser (default without --z1/--z2)")
        p.add_argument("--csv-dir", default=None, help="directory for CSV field dumps")

    p = sub.add_parser("sweep-gamma", parents=[common], help="track the H_gamma minimiser")
    p.add_argument("--gammas", type=_float_list, default=[0.5, 0.3, 0.2, 0.1, 0.05])

    p = sub.add_parser("verify", parents=[common], help="run a verification suite")
    p.add_argument("--suite", choices=sorted(SUITES), default="acceptance")
    return parser


def config_from_args(args):
    threads = args.threads if args.threads is not None else _default_threads()
    cfg = RunConfig(command=args.command, domain=parse_domain(args.domain), grid_n=args.grid_n,
                    r_factor=args.r_factor, tol=args.tol, seed=args.seed, threads=threads,
                    outputs={"out": args.out})
    cfg.gamma = getattr(args, "gamma", None)
    cfg.epsilon = getattr(args, "epsilon", None)
    cfg.z1 = getattr(args, "z1", None)
    cfg.z2 = getattr(args, "z2", None)
    if args.command == "greens":
        cfg.z1, cfg.z2 = args.z, args.x
        cfg.options = {"method": args.method}
    elif args.command == "minimize":
        cfg.options = {"starts": args.starts}
    elif args.command in ("ansatz", "solve"):
        cfg.options = {"minimize": bool(args.minimize)}
        cfg.outputs["csv_dir"] = args.csv_dir
    elif args.command == "sweep-gamma":
        cfg.options = {"gammas": args.gammas}
    elif args.command == "verify":
        cfg.options = {"suite": args.suite}
    if args.command != "greens":
        cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _table(cfg, method=None):
    dom = DomainModel.from_spec(cfg.domain, cfg.grid_n, cfg.r_factor)
    return GreensTable(dom, method)


def _peaks(cfg, tbl):
    if cfg.z1 is not None and not cfg.options.get("minimize"):
        return PeakConfig(cfg.z1, cfg.z2, default_delta(tbl)).validate(tbl.domain)
    Z, _ = minimize_hamiltonian(tbl, cfg.gamma, seed=cfg.seed, threads=cfg.threads)
    return Z


def cmd_greens(cfg):
    tbl = _table(cfg, cfg.options.get("method"))
    z = cfg.z1
    out = {"z": z, "method": tbl.method, "h_value": tbl.robin(z),
           "extremizers": boundary_extremizer(tbl, z)}
    if cfg.z2 is not None:
        x = np.array(cfg.z2)
        out["x"] = cfg.z2
        out["g"] = float(tbl.regular_part(x, z))
        out["green"] = float(tbl.green(x, z))
    return out


def cmd_harmonic_center(cfg):
    c, hv = harmonic_center(_table(cfg))
    return {"center": c, "h_value": hv}


def cmd_minimize(cfg):
    tbl = _table(cfg)
    Z, value = minimize_hamiltonian(tbl, cfg.gamma, starts=cfg.options["starts"], seed=cfg.seed,
                                    threads=cfg.threads)
    grad = hamiltonian_gradient(tbl, Z, 1.0, cfg.gamma)
    return {"z1": Z.z1, "z2": Z.z2, "value": value, "gradient_norm": float(np.linalg.norm(grad))}


def _field_csv(grid, values, name):
    X, Y = grid.coords()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", name])
    for x, y, v in zip(X[grid.inside], Y[grid.inside], values[grid.inside]):
        w.writerow([_fmt(x), _fmt(y), _fmt(v)])
    return buf.getvalue()


def cmd_ansatz(cfg):
    tbl = _table(cfg)
    Z = _peaks(cfg, tbl)
    ans = build_ansatz(tbl, Z, cfg.gamma, cfg.epsilon)
    W = ans.W
    ell = error_term(W, cfg.gamma, cfg.epsilon)
    rep = verify_level_sets(ans)
    out = {
        "z1": Z.z1, "z2": Z.z2, "a1": ans.amps.a1, "a2": ans.amps.a2,
        "asymptotic_regime": ans.amps.asymptotic_regime,
        "W_stats": {"max": float(W.interior().max()), "min": float(W.interior().min()),
                    "l2": W.l2_norm(), "closed_form_discrepancy": ans.closed_form_discrepancy()},
        "levelset_report": rep,
        "l2_error_term": ell.l2_norm(),
        "energy": ansatz_energy(ans),
        "expansion": reduced_energy_expansion(tbl, Z, cfg.gamma, cfg.epsilon),
    }
    if cfg.outputs.get("csv_dir"):
        d = Path(cfg.outputs["csv_dir"])
        d.mkdir(parents=True, exist_ok=True)
        (d / "W.csv").write_text(_field_csv(tbl.grid, W.values, "W"), encoding="utf-8")
    return out


def _contours_csv(res, gamma):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["level", "curve", "closed", "x", "y"])
    for level, lines in ((1.0, res.free_boundary_pos), (-gamma, res.free_boundary_neg)):
        for k, line in enumerate(lines):
            for x, y in line.points:
                w.writerow([_fmt(level), k, int(line.closed), _fmt(x), _fmt(y)])
    return buf.getvalue()


def cmd_solve(cfg):
    tbl = _table(cfg)
    check_resolution(tbl.grid, cfg.epsilon)
    Z = _peaks(cfg, tbl)
    t0 = time.perf_counter()
    res = solve_pde(tbl, Z, cfg.gamma, cfg.epsilon, tol=cfg.tol)
    _log(f"solve: {res.iterations} Newton steps in {time.perf_counter() - t0:.2f} s")
    eps2 = cfg.epsilon ** 2
    out = {
        "z1": Z.z1, "z2": Z.z2, "z_seed": [res.Z_seed.z1, res.Z_seed.z2],
        "z_fit": [res.Z_fit.z1, res.Z_fit.z2],
        "iterations": res.iterations, "residual_norm": res.residual_norm,
        "correction_norm": res.correction_norm, "seed_correction_norm": res.seed_correction_norm,
        "continuation": res.continuation,
        "components_pos": connected_components(res.plasma_pos),
        "components_neg": connected_components(res.plasma_neg),
        "eps2_lambda1_pos": eps2 * plasma_eigenvalue(res.u, 1.0, 1.0),
        "eps2_lambda1_neg": eps2 * plasma_eigenvalue(res.u, -cfg.gamma, -1.0),
        "areas": {"pos": [p.area for p in res.free_boundary_pos],
                  "neg": [p.area for p in res.free_boundary_neg]},
    }
    if cfg.outputs.get("csv_dir"):
        d = Path(cfg.outputs["csv_dir"])
        d.mkdir(parents=True, exist_ok=True)
        (d / "u.csv").write_text(_field_csv(tbl.grid, res.u.values, "u"), encoding="utf-8")
        (d / "contours.csv").write_text(_contours_csv(res, cfg.gamma), encoding="utf-8")
    return out


def sweep_csv(records):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["gamma", "z1_x", "z1_y", "z2_x", "z2_y", "dist_center", "dist_boundary",
                "nu_extremizer", "nu_value", "error"])
    for r in records:
        w.writerow([_fmt(r.gamma), *map(_fmt, r.z1_gamma), *map(_fmt, r.z2_gamma),
                    _fmt(r.dist_to_center), _fmt(r.dist_to_boundary), r.attracting,
                    _fmt(r.nu_derivative_at_projection), r.error])
    return buf.getvalue()


def cmd_sweep(cfg):
    records = gamma_sweep(_table(cfg), cfg.options["gammas"], seed=cfg.seed, threads=cfg.threads)
    return sweep_csv(records)


def cmd_verify(cfg):
    if cfg.domain.get("type") != "disk" or cfg.domain.get("radius", 1.0) != 1.0:
        raise ParameterError("verification suites run on the unit disk")
    ctx = Context(cfg.grid_n, cfg.r_factor, cfg.seed, cfg.threads)
    report = run_suite(cfg.options["suite"], ctx)
    for chk in report["checks"]:
        _log(f"{'PASS' if chk['passed'] else 'FAIL'}  {chk['name']}")
    return report


HANDLERS = {
    "greens": cmd_greens,
    "harmonic-center": cmd_harmonic_center,
    "minimize": cmd_minimize,
    "ansatz": cmd_ansatz,
    "solve": cmd_solve,
    "sweep-gamma": cmd_sweep,
    "verify": cmd_verify,
}


def _join_negative_values(argv):
    """``--z1 -0.2,0`` -> ``--z1=-0.2,0``; argparse would read the value as a flag."""
    out = []
    it = iter(argv)
    for tok in it:
        if tok in VALUE_FLAGS:
            nxt = next(it, None)
            if nxt is not None and nxt[:1] == "-" and nxt[1:2] in set("0123456789."):
                out.append(f"{tok}={nxt}")
                continue
            out.append(tok)
            if nxt is not None:
                out.append(nxt)
            continue
        out.append(tok)
    return out


def run_command(argv=None):
    """Parse ``argv``, run the command and return the exit status."""
    parser = build_parser()
    argv = _join_negative_values(sys.argv[1:] if argv is None else list(argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return int(exc.code or 0)
    try:
        cfg = config_from_args(args)
        _kernels.set_threads(cfg.threads)
        result = HANDLERS[cfg.command](cfg)
    except ValidationError as exc:
        _log(f"error: {exc}")
        return EXIT_INVALID
    except NumericalError as exc:
        _log(f"numerical failure: {exc}")
        return EXIT_NUMERICAL
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        _log(f"error: {exc}")
        return EXIT_INVALID
    if isinstance(result, str):
        _write(result, cfg.outputs.get("out"))
        return EXIT_OK
    _write(to_json({"config": cfg.to_dict(), "result": result}), cfg.outputs.get("out"))
    if cfg.command == "verify" and not result["passed"]:
        return EXIT_FAILED
    return EXIT_OK


def main(argv=None):
    sys.exit(run_command(argv))


if __name__ == "__main__":
    main()

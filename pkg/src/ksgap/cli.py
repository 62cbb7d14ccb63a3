"""Command-line front end.

Exit codes: 0 success, 1 numerical failure, 2 usage error. Every option may
also come from a plain ``key=value`` file given with ``--config``; flags on
the command line take precedence.
"""

import argparse
import sys

import numpy as np

from . import evolve, io, spectrum, verify
from .errors import ConvergenceError, IntegrationError, PreconditionError
from .grid import RadialGrid
from .profile import CRITICAL_MASS, solve_stationary

DEFAULTS = {
    "mass": 4 * np.pi,
    "mass_grid": "0.5:25:20",
    "s_max": 400.0,
    "nodes": None,
    "ratio": 1.02,
    "tol": 1e-9,
    "dt": 1e-3,
    "t_end": 6.0,
    "seed": 0,
    "out": None,
    "suite": None,
    "count": 200,
    "radial_count": 1,
    "k1_count": 1,
    "delta": 1e-3,
    "workers": 1,
}

DEFAULT_OUT = {
    "stationary": "profile.csv",
    "spectrum": "spectrum.csv",
    "scan": "scan.csv",
    "forms": "forms.csv",
    "evolve": "trace.csv",
    "verify": "-",
}

CONVERTERS = {
    "mass": float, "s_max": float, "nodes": int, "ratio": float, "tol": float,
    "dt": float, "t_end": float, "seed": int, "count": int, "radial_count": int,
    "k1_count": int, "delta": float, "workers": int,
    "mass_grid": str, "out": str, "suite": str,
}


class UsageError(Exception):
    pass


def read_config(path):
    cfg = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    for num, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{num}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONVERTERS:
            raise UsageError(f"{path}:{num}: unknown key {key!r}")
        cfg[key] = value
    return cfg


def resolve(args):
    """Merge defaults, config file and flags into one typed dict."""
    merged = dict(DEFAULTS)
    if args.config:
        merged.update(read_config(args.config))
    for key in CONVERTERS:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    out = {}
    for key, val in merged.items():
        if val is None or key not in CONVERTERS:
            out[key] = val
            continue
        try:
            out[key] = CONVERTERS[key](val)
        except ValueError:
            raise UsageError(f"invalid value for {key}: {val!r}") from None
    for key in ("tol", "dt", "t_end", "s_max", "delta"):
        if not out[key] > 0:
            raise UsageError(f"{key} must be positive")
    if out["ratio"] <= 1:
        raise UsageError("ratio must exceed 1")
    for key in ("count", "workers", "radial_count", "k1_count"):
        if out[key] < 1:
            raise UsageError(f"{key} must be at least 1")
    return out


def check_mass(M):
    if not 0 < M < CRITICAL_MASS:
        raise UsageError(f"mass {M!r} outside the subcritical range (0, 8*pi) = (0, {CRITICAL_MASS!r})")
    return M


def parse_mass_grid(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError("mass grid must read a:b:n")
    try:
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"invalid mass grid {text!r}") from None
    if n < 0:
        raise UsageError("mass grid count must be nonnegative")
    masses = np.linspace(a, b, n) if n != 1 else np.array([a])
    for M in masses:
        check_mass(float(M))
    return [float(M) for M in masses]


def build_grid(cfg):
    try:
        if cfg["nodes"] is not None:
            return RadialGrid.with_nodes(cfg["nodes"], s_max=cfg["s_max"])
        return RadialGrid.geometric(ratio=cfg["ratio"], s_max=cfg["s_max"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def emit(cfg, command, text):
    path = cfg["out"] or DEFAULT_OUT[command]
    if path == "-":
        sys.stdout.write(text)
    else:
        io.write_text(path, text)
    return path


def report(pairs):
    sys.stdout.write(io.keyvalue(pairs))


def cmd_stationary(cfg):
    M = check_mass(cfg["mass"])
    p = solve_stationary(M, build_grid(cfg), tol=cfg["tol"])
    path = emit(cfg, "stationary", io.profile_csv(p))
    report([("mass", p.mass), ("slope", p.slope), ("n_inf_0", 2 * p.slope),
            ("alpha", p.alpha), ("mu0_prime", p.mu0_prime), ("nodes", p.s.size), ("out", path)])
    return 0


def cmd_spectrum(cfg):
    M = check_mass(cfg["mass"])
    p = solve_stationary(M, build_grid(cfg), tol=cfg["tol"])
    rad = spectrum.find_radial_eigenvalues(p, count=cfg["radial_count"], include_kernel=False)
    k1 = spectrum.find_k1_eigenvalues(p, count=cfg["k1_count"])
    rows = [(M, 0, j, m.eigenvalue, m.residual) for j, m in enumerate(rad, start=1)]
    rows += [(M, 1, j, m.eigenvalue, m.residual) for j, m in enumerate(k1, start=1)]
    path = emit(cfg, "spectrum", io.csv_text(io.SCAN_HEADER, rows))
    lam0 = spectrum.poincare_mode(p, 0, True, check=False).value
    lam1 = spectrum.poincare_constant(p, 1)
    pairs = [("mass", M)]
    pairs += [(f"radial_{j}", m.eigenvalue) for j, m in enumerate(rad, start=1)]
    pairs += [(f"k1_{j}", m.eigenvalue) for j, m in enumerate(k1, start=1)]
    pairs += [("poincare_k0", lam0), ("poincare_k1", lam1), ("out", path)]
    report(pairs)
    if lam0 <= 1:
        sys.stderr.write(f"constrained radial Poincare constant {lam0!r} is not above 1\n")
        return 1
    return 0


def cmd_scan(cfg):
    masses = parse_mass_grid(cfg["mass_grid"])
    scan = spectrum.scan_masses(masses, cfg["radial_count"], cfg["k1_count"],
                                grid=build_grid(cfg), workers=cfg["workers"])
    path = emit(cfg, "scan", io.scan_csv(scan, cfg["radial_count"], cfg["k1_count"]))
    frac = scan.success_fraction
    pairs = [("masses", len(masses)), ("failures", len(scan.failures)),
             ("success_fraction", frac), ("out", path)]
    pairs += [(f"failed.{M!r}", msg.replace("\n", " ")) for M, msg in sorted(scan.failures.items())]
    report(pairs)
    return 0 if frac >= 0.9 else 1


def cmd_forms(cfg):
    M = check_mass(cfg["mass"])
    p = solve_stationary(M, build_grid(cfg), tol=cfg["tol"])
    Lam = spectrum.poincare_mode(p, 0, True, check=False).value
    reps = verify.inequality_battery(p, Lam, cfg["count"], cfg["seed"])
    path = emit(cfg, "forms", io.forms_csv(reps))
    pairs = [("mass", M), ("lambda", Lam), ("count", len(reps))]
    for key in reps[0].margins:
        pairs.append((f"{key}.failures", sum(not r.conditions[key] for r in reps)))
    pairs.append(("out", path))
    report(pairs)
    return 0 if all(r.passed for r in reps) else 1


def cmd_evolve(cfg):
    M = check_mass(cfg["mass"])
    pb = evolve.EvolutionProblem(solve_stationary(M, build_grid(cfg), tol=cfg["tol"]))
    tr = evolve.run(evolve.dilated(pb, cfg["delta"]), cfg["t_end"], cfg["dt"], 10)
    path = emit(cfg, "evolve", io.trace_csv(tr))
    pairs = [("mass", M), ("delta", cfg["delta"]), ("t_end", cfg["t_end"]), ("dt", cfg["dt"])]
    if tr.times.size >= 4:
        pairs += [("rate_q1", evolve.decay_rate(tr, "q1")[0]),
                  ("rate_weighted_l2", evolve.decay_rate(tr, "weighted_l2")[0])]
    pairs += [("max_mass_defect", float(tr.mass_defect.max())), ("out", path)]
    report(pairs)
    return 0


def cmd_verify(cfg):
    names = list(verify.SUITES) if cfg["suite"] in (None, "", "all") else cfg["suite"].split(",")
    unknown = [n for n in names if n not in verify.SUITES]
    if unknown:
        raise UsageError(f"unknown suite(s) {', '.join(unknown)}; choose from {', '.join(verify.SUITES)}")
    vcfg = {"grid": build_grid(cfg), "tol": cfg["tol"], "dt": cfg["dt"], "t_end": cfg["t_end"],
            "seed": cfg["seed"], "count": cfg["count"], "workers": cfg["workers"]}
    if cfg["mass_grid"] != DEFAULTS["mass_grid"]:
        vcfg["scan_masses"] = parse_mass_grid(cfg["mass_grid"])
    results = verify.run_suites(names, vcfg)
    pairs = []
    for name, (ok, details) in results.items():
        pairs.append((f"{name}.pass", bool(ok)))
        pairs += [(f"{name}.{k}", v) for k, v in details]
    passed = all(ok for ok, _ in results.values())
    pairs.append(("all.pass", passed))
    text = io.keyvalue(pairs)
    if (cfg["out"] or "-") == "-":
        sys.stdout.write(text)
    else:
        io.write_text(cfg["out"], text)
        report([(f"{n}.pass", bool(r[0])) for n, r in results.items()] + [("all.pass", passed)])
    return 0 if passed else 1


COMMANDS = {
    "stationary": cmd_stationary,
    "spectrum": cmd_spectrum,
    "scan": cmd_scan,
    "forms": cmd_forms,
    "evolve": cmd_evolve,
    "verify": cmd_verify,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file; flags override it")
    common.add_argument("--mass", help="total mass in (0, 8*pi)")
    common.add_argument("--mass-grid", dest="mass_grid", help="a:b:n, n masses from a to b")
    common.add_argument("--s-max", dest="s_max", help="outer end of the grid in s = r^2")
    common.add_argument("--nodes", help="use a purely geometric grid with this many nodes")
    common.add_argument("--ratio", help="geometric growth ratio of the default grid")
    common.add_argument("--tol", help="mass tolerance of the profile solve")
    common.add_argument("--dt", help="time step")
    common.add_argument("--t-end", dest="t_end", help="final time")
    common.add_argument("--seed", help="seed of randomized suites")
    common.add_argument("--out", help="output path, '-' for stdout")
    common.add_argument("--suite", help="comma-separated verify suites (default: all)")
    common.add_argument("--count", help="number of random perturbations")
    common.add_argument("--radial-count", dest="radial_count", help="radial eigenvalues per mass")
    common.add_argument("--k1-count", dest="k1_count", help="k=1 eigenvalues per mass")
    common.add_argument("--delta", help="dilation amplitude of the evolve initial datum")
    common.add_argument("--workers", help="parallel processes for scans")
    parser = argparse.ArgumentParser(prog="ksgap", description="Stationary profiles, spectra "
                                     "and relaxation of the radial self-similar Keller-Segel system.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](cfg)
    except (UsageError, PreconditionError) as exc:
        sys.stderr.write(f"ksgap: error: {exc}\n")
        return 2
    except (IntegrationError, ConvergenceError, FloatingPointError) as exc:
        sys.stderr.write(f"ksgap: numerical failure: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())

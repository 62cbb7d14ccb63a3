"""Comma-separated output with a single header line and round-trip float formatting."""

import io as _io

import numpy as np


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def csv_text(header, rows):
    buf = _io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def write_text(path, text):
    # newline="" keeps "\n" on every platform
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(text)


def read_csv(path):
    """Header list and a float array of the rows."""
    with open(path, encoding="ascii") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


PROFILE_HEADER = ["s", "Phi", "dPhi", "r", "n_inf", "c_inf", "f00"]
SCAN_HEADER = ["mass", "k", "index", "lambda", "residual"]
TRACE_HEADER = ["t", "q1", "weighted_l2", "mass_defect", "min_density"]
FORMS_HEADER = ["mass", "q1", "q2", "ratio", "l2w", "lambda_used"]
REARRANGED_HEADER = ["sigma", "u_star", "k0"]


def profile_csv(profile):
    cols = [profile.s, profile.phi, profile.dphi, profile.r, profile.n_inf,
            profile.c_inf, profile.f00]
    return csv_text(PROFILE_HEADER, zip(*cols))


def scan_csv(scan, count_radial=1, count_k1=1):
    rows = []
    for M, rad, k1, res in zip(scan.masses, scan.radial, scan.k1, scan.residuals):
        if rad is None:
            rows += [(M, 0, j, np.nan, np.nan) for j in range(1, count_radial + 1)]
            rows += [(M, 1, j, np.nan, np.nan) for j in range(1, count_k1 + 1)]
            continue
        rows += [(M, 0, j, lam, r) for j, (lam, r) in enumerate(zip(rad, res[0]), start=1)]
        rows += [(M, 1, j, lam, r) for j, (lam, r) in enumerate(zip(k1, res[1]), start=1)]
    return csv_text(SCAN_HEADER, rows)


def trace_csv(trace):
    return csv_text(TRACE_HEADER, trace.rows())


def forms_csv(reports):
    return csv_text(FORMS_HEADER, [(r.mass, r.q1, r.q2, r.ratio, r.l2_weighted, r.lambda_used)
                                   for r in reports])


def rearranged_csv(datum):
    return csv_text(REARRANGED_HEADER, zip(datum.sigma, datum.u_star, datum.k0[1:]))


def keyvalue(pairs):
    return "".join(f"{k}={fmt(v) if not isinstance(v, str) else v}\n" for k, v in pairs)

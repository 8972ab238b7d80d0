"""Relative error measures against the exact solution and slope fits."""

import csv
from dataclasses import asdict, dataclass

import numpy as np

from .vemspace import pixel_quadrature

CSV_FIELDS = ("H", "h", "k", "tau_hat", "active_dofs", "e0", "e1")


@dataclass
class ErrorRecord:
    H: float
    h: float
    k: int
    tau_hat: float
    active_dofs: int
    e0: float
    e1: float

    def row(self):
        return [f"{self.H:.10g}", f"{self.h:.10g}", str(self.k), f"{self.tau_hat:.10g}",
                str(self.active_dofs), f"{self.e0:.10e}", f"{self.e1:.10e}"]


def compute_errors(mesh, ops, u_h, case, quad_points=None):
    """Relative errors ||u - Pi0_k u_h|| / ||u|| and |u - Pi0_{k-1} grad u_h| / |u|_1 on Omega_h."""
    num0 = den0 = num1 = den1 = 0.0
    for el, op in zip(mesh.elements, ops):
        n = quad_points or op.k + 3
        x, w = pixel_quadrature(mesh, el, n)
        ul = u_h[op.dofs]
        uh = op.basis(x) @ (op.Pi0_star @ ul)
        m1 = op.basis(x)[:, : op.Pi0_grad_star.shape[1]]
        gh = np.stack([m1 @ (op.Pi0_grad_star[0] @ ul), m1 @ (op.Pi0_grad_star[1] @ ul)], axis=-1)
        u = case.u_exact(x)
        gu = case.grad_u_exact(x)
        num0 += w @ (u - uh) ** 2
        den0 += w @ u ** 2
        num1 += w @ np.sum((gu - gh) ** 2, axis=-1)
        den1 += w @ np.sum(gu ** 2, axis=-1)
    e0 = np.sqrt(num0 / den0) if den0 > 0 else np.sqrt(num0)
    e1 = np.sqrt(num1 / den1) if den1 > 0 else np.sqrt(num1)
    return float(e0), float(e1)


def fit_slope(records):
    """Least-squares slope of log(e) against log(H) for pairs (H, e)."""
    data = np.asarray(list(records), dtype=float)
    if data.ndim != 2 or len(data) < 2:
        raise ValueError("need at least two (H, e) pairs")
    if np.any(data <= 0):
        raise ValueError("H and e must be positive")
    return float(np.polyfit(np.log(data[:, 0]), np.log(data[:, 1]), 1)[0])


def write_csv(records, path_or_file):
    def _write(fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for r in records:
            writer.writerow(r.row())

    if hasattr(path_or_file, "write"):
        _write(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            _write(fh)


def read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(CSV_FIELDS) - set(reader.fieldnames or ())
        if missing:
            from .exceptions import ParseError
            raise ParseError(f"{path}: missing columns {sorted(missing)}")
        return [ErrorRecord(float(r["H"]), float(r["h"]), int(r["k"]), float(r["tau_hat"]),
                            int(r["active_dofs"]), float(r["e0"]), float(r["e1"])) for r in reader]


def as_dict(record):
    return asdict(record)

"""Sparse direct solution with a post hoc residual check."""

import time
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import NonFiniteEntry, SingularMatrix

DENSE_LIMIT = 2000


@dataclass
class SolveReport:
    dof_count: int
    nnz: int
    factor_time: float
    solve_time: float
    relative_residual: float
    method: str


def solve_sparse(system, rtol=1e-10, dense_limit=DENSE_LIMIT, error=SingularMatrix):
    """Solve ``system`` (a LinearSystem or a (matrix, rhs) pair) by LU."""
    if isinstance(system, tuple):
        A, b = system
    else:
        A, b = system.matrix, system.rhs
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or b.shape != (n,):
        raise ValueError(f"incompatible system shapes {A.shape} and {b.shape}")
    if not np.all(np.isfinite(A.data)) or not np.all(np.isfinite(b)):
        raise NonFiniteEntry("system has non-finite entries")
    t0 = time.perf_counter()
    if n < dense_limit:
        method = "dense"
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                lu = scipy.linalg.lu_factor(A.toarray(), check_finite=False)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise error(str(exc)) from exc
        if np.any(np.diag(lu[0]) == 0):
            raise error("matrix is exactly singular")
        t1 = time.perf_counter()
        x = scipy.linalg.lu_solve(lu, b, check_finite=False)
    else:
        method = "superlu"
        try:
            lu = spla.splu(A.tocsc())
        except RuntimeError as exc:
            raise error(str(exc)) from exc
        t1 = time.perf_counter()
        x = lu.solve(b)
    t2 = time.perf_counter()
    nb = np.linalg.norm(b)
    res = np.linalg.norm(A @ x - b) / (nb if nb > 0 else 1.0)
    if not np.all(np.isfinite(x)) or res > rtol:
        raise error(f"direct solve failed: relative residual {res:.3g} (n={n})")
    return x, SolveReport(n, int(A.nnz), t1 - t0, t2 - t1, float(res), method)

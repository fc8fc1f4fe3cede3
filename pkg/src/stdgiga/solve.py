"""Direct sparse LU solution of the assembled system."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import SolverError

__all__ = ["SolveReport", "solve", "relative_residual"]

COLUMN_ORDERING = "COLAMD"


@dataclass(frozen=True)
class SolveReport:
    solution: np.ndarray
    relative_residual: float
    nnz_matrix: int
    nnz_factors: int
    permc_spec: str

    @property
    def fill_ratio(self) -> float:
        return self.nnz_factors / max(self.nnz_matrix, 1)


def relative_residual(matrix, x, b) -> float:
    """``||b - A x|| / ||b||``, or ``||A x||`` when ``b = 0``."""
    r = b - matrix @ x
    nb = float(np.linalg.norm(b))
    if nb == 0.0:
        return float(np.linalg.norm(r))
    return float(np.linalg.norm(r)) / nb


def solve(system, permc_spec: str = COLUMN_ORDERING) -> SolveReport:
    """Factorize with SuperLU (partial pivoting) and solve.

    ``system`` is a ``SparseSystem`` or a ``(matrix, rhs)`` pair.
    """
    if isinstance(system, tuple):
        A, b = system
    else:
        A, b = system.matrix, system.rhs
    A = sp.csc_matrix(A)
    b = np.asarray(b, dtype=float)
    n, m = A.shape
    if n != m or n < 1:
        raise SolverError(f"expected a non-empty square matrix, got shape {A.shape}")
    if b.shape != (n,):
        raise SolverError(f"right-hand side has shape {b.shape}, expected ({n},)")
    try:
        lu = spla.splu(A, permc_spec=permc_spec)
    except RuntimeError as exc:
        empty_rows = np.flatnonzero(np.diff(A.tocsr().indptr) == 0)
        empty_cols = np.flatnonzero(np.diff(A.indptr) == 0)
        raise SolverError(
            f"LU factorization failed ({exc}); {empty_rows.size} empty rows, "
            f"{empty_cols.size} empty columns"
        ) from exc
    diag = np.abs(lu.U.diagonal())
    if diag.min() <= np.finfo(float).eps * diag.max() * n:
        k = int(np.argmin(diag))
        raise SolverError(
            f"numerically singular matrix: pivot {k} has magnitude {diag[k]:.3e} "
            f"(largest {diag.max():.3e})"
        )
    x = lu.solve(b)
    return SolveReport(x, relative_residual(A, x, b), int(A.nnz), int(lu.L.nnz + lu.U.nnz), permc_spec)

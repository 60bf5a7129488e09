"""Thomas algorithm for tridiagonal systems.

The factorization is split from the substitution so that a constant matrix
can be eliminated once and reused for every right-hand side of a time march.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .errors import ZeroPivot

PIVOT_TOL = 1e-14


@njit(cache=True, nogil=True)
def _factor(sub, diag, sup, mult, inv_pivot):
    # returns index of the first tiny pivot, or -1
    n = diag.shape[0]
    piv = diag[0]
    if abs(piv) < PIVOT_TOL:
        return 0
    inv_pivot[0] = 1.0 / piv
    for i in range(1, n):
        mult[i - 1] = sub[i - 1] * inv_pivot[i - 1]
        piv = diag[i] - mult[i - 1] * sup[i - 1]
        if abs(piv) < PIVOT_TOL:
            return i
        inv_pivot[i] = 1.0 / piv
    return -1


@njit(cache=True, nogil=True)
def _substitute(sup, mult, inv_pivot, rhs, out):
    n = rhs.shape[0]
    out[0] = rhs[0]
    for i in range(1, n):
        out[i] = rhs[i] - mult[i - 1] * out[i - 1]
    out[n - 1] *= inv_pivot[n - 1]
    for i in range(n - 2, -1, -1):
        out[i] = (out[i] - sup[i] * out[i + 1]) * inv_pivot[i]


class TridiagonalFactor:
    """LU factors of a tridiagonal matrix, ready for repeated solves.

    Attributes:
        sup: super-diagonal of the original matrix.
        mult: elimination multipliers (length n-1).
        inv_pivot: reciprocals of the U diagonal (length n).
    """

    def __init__(self, sub, diag, sup):
        diag = np.ascontiguousarray(diag, dtype=np.float64)
        sub = np.ascontiguousarray(sub, dtype=np.float64)
        sup = np.ascontiguousarray(sup, dtype=np.float64)
        n = diag.shape[0]
        if diag.ndim != 1 or n < 1:
            raise ValueError("diag must be a non-empty vector")
        if sub.shape != (n - 1,) or sup.shape != (n - 1,):
            raise ValueError(f"sub and sup must have length {n - 1}")
        self.sup = sup
        self.mult = np.empty(max(n - 1, 0))
        self.inv_pivot = np.empty(n)
        bad = _factor(sub, diag, sup, self.mult, self.inv_pivot)
        if bad >= 0:
            raise ZeroPivot(f"pivot {bad} has magnitude below {PIVOT_TOL:g}")

    @property
    def size(self) -> int:
        return self.inv_pivot.shape[0]

    def solve(self, rhs) -> np.ndarray:
        rhs = np.ascontiguousarray(rhs, dtype=np.float64)
        if rhs.shape != (self.size,):
            raise ValueError(f"rhs must have length {self.size}")
        out = np.empty_like(rhs)
        _substitute(self.sup, self.mult, self.inv_pivot, rhs, out)
        return out


def tridiagonal_solve(sub, diag, sup, rhs) -> np.ndarray:
    """Solve ``M x = rhs`` for tridiagonal ``M``.

    Parameters
    ----------
    sub : array_like, length n-1
        Entries ``M[i+1, i]``.
    diag : array_like, length n
    sup : array_like, length n-1
        Entries ``M[i, i+1]``.
    rhs : array_like, length n

    Returns
    -------
    numpy.ndarray

    Raises
    ------
    ZeroPivot
        If elimination meets a pivot smaller than 1e-14 in magnitude.
    """
    return TridiagonalFactor(sub, diag, sup).solve(rhs)

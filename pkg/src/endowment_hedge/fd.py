"""Semi-implicit finite differences for the mortality price factors.

Every surface is solved in ``y = ln(lambda - floor)`` and time-to-maturity
``tau = T - t`` on ``[-M, M] x [0, T]``. Diffusion, drift and the death
killing term are implicit at the new time level. The square-root risk
loading is explicit at the old level, so each step is one tridiagonal solve
with a matrix that never changes during the march.

The n-life recursion solves the level-n equation with the level-(n-1)
surface as a source:

    psi_tau = ahat psi_y + b^2/2 psi_yy - n lam (psi - psi_prev)
              + alpha sqrt((1 - rho^2) b^2 psi_y^2 + n lam (psi - psi_prev)^2)

Linear surfaces (the limit factor and the reference survival factor) use the
same march with the loading switched off and ``n = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
from numba import njit
from scipy.linalg import expm

from . import model
from .errors import NonConvergedGrid, NonPositiveDimension, NonPositiveVolatility, OutOfDomain
from .model import HazardParams, MarketSpec, PopulationPair
from .tridiag import TridiagonalFactor

BOUND_TOL = 1e-6

DEFAULT_M = 8.0
DEFAULT_I = 640
DEFAULT_J = 1000


@dataclass(frozen=True)
class Grid1D:
    m: float
    i_count: int
    j_count: int
    maturity: float

    @property
    def h(self) -> float:
        return 2.0 * self.m / self.i_count

    @property
    def k(self) -> float:
        return self.maturity / self.j_count

    @property
    def y(self) -> np.ndarray:
        return -self.m + self.h * np.arange(self.i_count + 1)

    @property
    def tau(self) -> np.ndarray:
        return self.k * np.arange(self.j_count + 1)

    def refined(self, factor: int) -> "Grid1D":
        return Grid1D(self.m, self.i_count * factor, self.j_count * factor, self.maturity)


def build_grid(m: float = DEFAULT_M, i_count: int = DEFAULT_I, j_count: int = DEFAULT_J,
               maturity: float = 10.0) -> Grid1D:
    """Log-space grid with ``h = 2M/I`` and ``k = T/J``.

    Raises NonPositiveDimension unless ``M > 0``, ``T > 0``, ``I >= 2`` and ``J >= 1``.
    """
    if not (m > 0 and maturity > 0):
        raise NonPositiveDimension(f"half-width {m!r} and maturity {maturity!r} must be > 0")
    if int(i_count) != i_count or int(j_count) != j_count:
        raise NonPositiveDimension("interval counts must be integers")
    if i_count < 2 or j_count < 1:
        raise NonPositiveDimension(f"need I >= 2 and J >= 1, got I={i_count}, J={j_count}")
    return Grid1D(float(m), int(i_count), int(j_count), float(maturity))


@dataclass(frozen=True)
class PdeCoefficients:
    """Coefficients of one transformed pricing equation.

    drift_hat already includes the ``-b^2/2`` Ito correction of the log map.
    ``sharpe`` multiplies the square-root loading and is ignored when
    ``nonlinear`` is false.
    """

    drift_hat: float
    vol: float
    floor: float
    sharpe: float
    rho: float
    nonlinear: bool
    source_surface: Optional["PriceSurface"] = None


@dataclass(frozen=True, eq=False)
class PriceSurface:
    """Solved factor on a grid.

    ``values[i, j]`` is the factor at ``y_i`` and ``tau_j``. The backing
    array is stored time-major and is read-only.
    """

    grid: Grid1D
    floor: float
    maturity: float
    terminal: float
    by_time: np.ndarray  # shape (J+1, I+1)

    @property
    def values(self) -> np.ndarray:
        return self.by_time.T

    @cached_property
    def dy_by_time(self) -> np.ndarray:
        # node derivatives in y: central inside, one-sided at the edges
        v = self.by_time
        h = self.grid.h
        d = np.empty_like(v)
        d[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / (2.0 * h)
        d[:, 0] = (v[:, 1] - v[:, 0]) / h
        d[:, -1] = (v[:, -1] - v[:, -2]) / h
        d.setflags(write=False)
        return d


@njit(cache=True, nogil=True)
def _march(mult, inv_pivot, sup, a_sub, c_sup, terminal, left, right, prev, jump,
           death_weight, grad_weight, alpha_k, out):
    n_t = out.shape[0]
    n_y = out.shape[1]
    m = n_y - 2
    rhs = np.empty(m)
    x = np.empty(m)
    for i in range(n_y):
        out[0, i] = terminal
    for j in range(n_t - 1):
        for ii in range(m):
            i = ii + 1
            psi = out[j, i]
            r = psi + jump[i] * prev[j + 1, i]
            if alpha_k > 0.0:
                d = out[j, i + 1] - out[j, i - 1]
                g = psi - prev[j, i]
                r += alpha_k * math.sqrt(grad_weight * d * d + death_weight[i] * g * g)
            rhs[ii] = r
        rhs[0] -= a_sub * left[j + 1]
        rhs[m - 1] -= c_sup * right[j + 1]
        x[0] = rhs[0]
        for ii in range(1, m):
            x[ii] = rhs[ii] - mult[ii - 1] * x[ii - 1]
        x[m - 1] *= inv_pivot[m - 1]
        for ii in range(m - 2, -1, -1):
            x[ii] = (x[ii] - sup[ii] * x[ii + 1]) * inv_pivot[ii]
        out[j + 1, 0] = left[j + 1]
        for ii in range(m):
            out[j + 1, ii + 1] = x[ii]
        out[j + 1, n_y - 1] = right[j + 1]


def _solve(grid: Grid1D, coeffs: PdeCoefficients, n: int, left: np.ndarray,
           bound_sharpe: float) -> PriceSurface:
    I, J = grid.i_count, grid.j_count
    h, k = grid.h, grid.k
    lam = coeffs.floor + np.exp(grid.y)
    b2 = coeffs.vol * coeffs.vol
    a_sub = coeffs.drift_hat * k / (2 * h) - b2 * k / (2 * h * h)
    c_sup = -coeffs.drift_hat * k / (2 * h) - b2 * k / (2 * h * h)
    diag = 1.0 + b2 * k / (h * h) + k * n * lam[1:-1]
    m_int = I - 1
    factor = TridiagonalFactor(np.full(m_int - 1, a_sub), diag, np.full(m_int - 1, c_sup))

    if coeffs.source_surface is None:
        prev = np.zeros((J + 1, I + 1))
    else:
        prev = coeffs.source_surface.by_time
        if prev.shape != (J + 1, I + 1):
            raise ValueError("source surface lives on a different grid")
    right = np.zeros(J + 1)
    right[0] = float(n)
    alpha_k = coeffs.sharpe * k if coeffs.nonlinear else 0.0
    grad_weight = (1.0 - coeffs.rho ** 2) * b2 / (4.0 * h * h)
    out = np.empty((J + 1, I + 1))
    _march(factor.mult, factor.inv_pivot, factor.sup, a_sub, c_sup, float(n),
           np.ascontiguousarray(left, dtype=np.float64), right, prev, k * n * lam,
           n * lam, grad_weight, alpha_k, out)

    if not np.all(np.isfinite(out)):
        raise NonConvergedGrid("non-finite values in solved surface")
    upper = n * np.exp(-(coeffs.floor - bound_sharpe * math.sqrt(coeffs.floor)) * grid.tau)
    low = out.min()
    excess = (out - upper[:, None]).max()
    if low < -BOUND_TOL or excess > BOUND_TOL:
        raise NonConvergedGrid(
            f"surface left [0, {n} h(t)] by {max(-low, excess):.3g}; refine the grid")
    out.setflags(write=False)
    return PriceSurface(grid, coeffs.floor, grid.maturity, float(n), out)


def _check_grid(grid: Grid1D, spec: MarketSpec) -> None:
    if not math.isclose(grid.maturity, spec.maturity, rel_tol=0, abs_tol=1e-12):
        raise ValueError(f"grid maturity {grid.maturity} differs from contract maturity "
                         f"{spec.maturity}")


def boundary_chain(floor: float, alpha: float, tau: np.ndarray, n: int) -> np.ndarray:
    """Left-edge values of levels 1..n, shape (n, len(tau)).

    At the floor the hazard is frozen, so level m obeys
    ``psi_m' = -c_m (psi_m - psi_{m-1})`` with ``c_m = m floor - alpha sqrt(m floor)``,
    ``psi_0 = 0`` and ``psi_m(0) = m``. Row 0 uses the closed form.
    """
    ms = np.arange(1, n + 1, dtype=float)
    c = ms * floor - alpha * np.sqrt(ms * floor)
    out = np.empty((n, tau.shape[0]))
    out[0] = np.exp(-c[0] * tau)
    if n > 1:
        gen = np.diag(-c) + np.diag(c[1:], -1)
        if tau.shape[0] > 1 and np.allclose(np.diff(tau), tau[1] - tau[0]):
            step = expm(gen * (tau[1] - tau[0]))
            state = ms.copy()
            out[:, 0] = state
            for j in range(1, tau.shape[0]):
                state = step @ state
                out[:, j] = state
        else:
            for j, tj in enumerate(tau):
                out[:, j] = expm(gen * tj) @ ms
        out[0] = np.exp(-c[0] * tau)
    return out


def psi_coefficients(pops: PopulationPair, spec: MarketSpec,
                     source: Optional[PriceSurface] = None) -> PdeCoefficients:
    b = pops.insured.b
    return PdeCoefficients(
        drift_hat=model.risk_neutral_drift_P(pops, spec) - 0.5 * b * b,
        vol=b, floor=pops.insured.lambda_floor, sharpe=spec.alpha, rho=spec.rho,
        nonlinear=True, source_surface=source)


def solve_psi_n(pops: PopulationPair, spec: MarketSpec, grid: Grid1D, n: int) -> list[PriceSurface]:
    """Solve the n-life recursion and return the surfaces for levels 1..n."""
    if n < 1:
        raise ValueError(f"n={n!r} must be >= 1")
    model.validate(spec, pops)
    _check_grid(grid, spec)
    floor = pops.insured.lambda_floor
    edges = boundary_chain(floor, spec.alpha, grid.tau, n)
    surfaces: list[PriceSurface] = []
    source = None
    for level in range(1, n + 1):
        coeffs = psi_coefficients(pops, spec, source)
        source = _solve(grid, coeffs, level, edges[level - 1], spec.alpha)
        surfaces.append(source)
    return surfaces


def solve_psi_single(pops: PopulationPair, spec: MarketSpec, grid: Grid1D) -> PriceSurface:
    """Single-life factor; identical to level 1 of :func:`solve_psi_n`."""
    return solve_psi_n(pops, spec, grid, 1)[0]


def solve_beta(pops: PopulationPair, spec: MarketSpec, grid: Grid1D) -> PriceSurface:
    """Per-contract limit factor: a linear survival PDE with the tilted drift."""
    model.validate(spec, pops)
    _check_grid(grid, spec)
    b = pops.insured.b
    floor = pops.insured.lambda_floor
    coeffs = PdeCoefficients(
        drift_hat=model.effective_limit_drift(pops, spec) - 0.5 * b * b,
        vol=b, floor=floor, sharpe=0.0, rho=spec.rho, nonlinear=False)
    return _solve(grid, coeffs, 1, np.exp(-floor * grid.tau), 0.0)


def solve_survival_factor(reference: HazardParams, spec: MarketSpec, grid: Grid1D) -> PriceSurface:
    """Risk-neutral survival factor of the reference population."""
    if not reference.b > 0 or not reference.lambda_floor > 0:
        raise NonPositiveVolatility("reference volatility and floor must be > 0")
    _check_grid(grid, spec)
    b = reference.b
    floor = reference.lambda_floor
    coeffs = PdeCoefficients(
        drift_hat=reference.a - spec.q_mort * b - 0.5 * b * b,
        vol=b, floor=floor, sharpe=0.0, rho=0.0, nonlinear=False)
    return _solve(grid, coeffs, 1, np.exp(-floor * grid.tau), 0.0)


def _locate(surface: PriceSurface, lam, t):
    g = surface.grid
    lam = np.asarray(lam, dtype=float)
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.log(lam - surface.floor)
    tau = surface.maturity - t
    eps = 1e-12
    if not np.all(np.isfinite(y)) or np.any(np.abs(y) > g.m + eps):
        raise OutOfDomain(f"hazard outside (floor + e^-M, floor + e^M) for floor={surface.floor}")
    if np.any(tau < -eps) or np.any(tau > surface.maturity + eps):
        raise OutOfDomain(f"time outside [0, {surface.maturity}]")
    tt = np.clip(tau / g.k, 0.0, g.j_count)
    j0 = np.minimum(np.floor(tt).astype(np.intp), g.j_count - 1)
    wt = tt - j0
    s = np.clip((y + g.m) / g.h, 0.0, g.i_count)
    return y, s, j0, wt


def lookup(surface: PriceSurface, lam, t, kind: str = "linear"):
    """Interpolated value and lambda-derivative of a surface.

    Args:
        surface: solved factor.
        lam: hazard level(s) strictly above the surface floor.
        t: calendar time(s) in ``[0, T]``.
        kind: ``"linear"`` for bilinear interpolation in ``(y, tau)``, or
            ``"quadratic"`` for three-point Lagrange in ``y`` and linear in ``tau``.

    Returns:
        ``(value, d value / d lambda)`` with the shape of the broadcast inputs.

    Raises:
        OutOfDomain: if ``ln(lam - floor)`` leaves ``[-M, M]`` or ``t`` leaves ``[0, T]``.
    """
    g = surface.grid
    y, s, j0, wt = _locate(surface, lam, t)
    v = surface.by_time
    if kind == "linear":
        i0 = np.minimum(np.floor(s).astype(np.intp), g.i_count - 1)
        wy = s - i0
        d = surface.dy_by_time

        def blend(arr):
            lo = (1 - wy) * arr[j0, i0] + wy * arr[j0, i0 + 1]
            hi = (1 - wy) * arr[j0 + 1, i0] + wy * arr[j0 + 1, i0 + 1]
            return (1 - wt) * lo + wt * hi

        value, dy = blend(v), blend(d)
    elif kind == "quadratic":
        ic = np.clip(np.rint(s).astype(np.intp), 1, g.i_count - 1)
        u = s - ic
        w = ((u * (u - 1) / 2, 1 - u * u, u * (u + 1) / 2))
        dw = ((2 * u - 1) / (2 * g.h), -2 * u / g.h, (2 * u + 1) / (2 * g.h))

        def blend(weights):
            acc = 0.0
            for off, wgt in zip((-1, 0, 1), weights):
                acc = acc + wgt * ((1 - wt) * v[j0, ic + off] + wt * v[j0 + 1, ic + off])
            return acc

        value, dy = blend(w), blend(dw)
    else:
        raise ValueError(f"unknown interpolation kind {kind!r}")
    deriv = dy * np.exp(-y)
    if value.ndim == 0:
        return float(value), float(deriv)
    return value, deriv


def price(surface: PriceSurface, spec: MarketSpec, lam, t, kind: str = "linear"):
    """Discounted price ``exp(-r (T - t)) * factor``."""
    value, _ = lookup(surface, lam, t, kind)
    out = np.exp(-spec.r * (surface.maturity - np.asarray(t, dtype=float))) * value
    return float(out) if np.ndim(out) == 0 else out

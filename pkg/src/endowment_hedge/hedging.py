"""Locally risk-minimizing q-forward hedge and a simulator for the hedged book.

The insurer sells pure endowments on ``n`` lives, receives the model price,
and holds ``pi`` q-forwards on the reference population plus cash. With a
constant short rate the T-bond is deterministic, so no bond position is
taken and all residual value sits in the money market.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import fd, mc, model
from .errors import DegenerateSensitivity
from .fd import Grid1D, PriceSurface
from .model import HazardParams, MarketSpec, PopulationPair

SENS_TOL = 1e-12
EXACT_MARKING_MAX = 10


@dataclass(frozen=True)
class HedgePosition:
    qforward_units: float
    bond_units: float
    money_market: float


@dataclass(frozen=True)
class PortfolioState:
    time: float
    value: float
    alive_count: int
    lambda_p: float
    lambda_i: float
    Lambda_i: float


@dataclass(frozen=True)
class HedgeSurfaces:
    """Surfaces needed to mark and hedge a book of ``n_insured`` contracts.

    ``levels[m - 1]`` is the level-m factor when exact marking is used;
    otherwise ``levels`` is empty and level m is marked as ``m * beta``.
    """

    n_insured: int
    levels: tuple
    beta: Optional[PriceSurface]
    survival: PriceSurface
    strike: float

    @property
    def marking(self) -> str:
        return "exact" if self.levels else "per-contract-limit"

    @property
    def horizon(self) -> float:
        return self.survival.maturity


def build_hedge_surfaces(pops: PopulationPair, spec: MarketSpec, grid: Grid1D, n_insured: int,
                         exact_max: int = EXACT_MARKING_MAX) -> HedgeSurfaces:
    """Solve the liability and q-forward surfaces for a book of ``n_insured`` lives.

    Books up to ``exact_max`` lives are marked with the full level recursion;
    larger books use the per-contract limit factor.
    """
    model.validate(spec, pops)
    if n_insured < 1:
        raise ValueError("n_insured must be >= 1")
    survival = fd.solve_survival_factor(pops.reference, spec, grid)
    strike, _ = fd.lookup(survival, pops.initial_reference, 0.0)
    if n_insured <= exact_max:
        levels = tuple(fd.solve_psi_n(pops, spec, grid, n_insured))
        return HedgeSurfaces(n_insured, levels, None, survival, strike)
    beta = fd.solve_beta(pops, spec, grid)
    return HedgeSurfaces(n_insured, (), beta, survival, strike)


def qforward_value(reference: HazardParams, spec: MarketSpec, lambda_i, Lambda_i, t,
                   survival_surface: PriceSurface, strike: float, kind: str = "linear"):
    """Value of one q-forward and its sensitivity to the reference hazard.

    ``S = exp(-r (T - t)) (exp(-Lambda) phi(lambda, t) - K)``.

    Returns:
        ``(value, dS/dlambda)``.
    """
    phi, dphi = fd.lookup(survival_surface, lambda_i, t, kind)
    disc = np.exp(-spec.r * (spec.maturity - np.asarray(t, dtype=float)))
    surv = np.exp(-np.asarray(Lambda_i, dtype=float))
    value = disc * (surv * phi - strike)
    sens = disc * surv * dphi
    if np.ndim(value) == 0:
        return float(value), float(sens)
    return value, sens


def hedge_ratio(pops: PopulationPair, spec: MarketSpec, p_lambda, s_lambda, lambda_p, lambda_i,
                degenerate: str = "raise"):
    """Locally variance-minimizing q-forward units.

    ``pi = rho b^P (lambda^P - floor^P) P_lambda / (b^I (lambda^I - floor^I) S_lambda)``

    Where ``|S_lambda| < 1e-12`` the ratio is undefined: ``degenerate="raise"``
    raises DegenerateSensitivity and ``degenerate="zero"`` holds no q-forwards there.
    """
    p_lambda = np.asarray(p_lambda, dtype=float)
    if spec.rho == 0.0:
        return np.zeros_like(p_lambda) + 0.0
    s_lambda = np.asarray(s_lambda, dtype=float)
    bad = np.abs(s_lambda) < SENS_TOL
    if np.any(bad) and degenerate == "raise":
        raise DegenerateSensitivity("q-forward sensitivity vanishes; hedge ratio undefined")
    x_p = pops.insured.b * (np.asarray(lambda_p) - pops.insured.lambda_floor)
    x_i = pops.reference.b * (np.asarray(lambda_i) - pops.reference.lambda_floor)
    safe = np.where(bad, 1.0, x_i * s_lambda)
    return np.where(bad, 0.0, spec.rho * x_p * p_lambda / safe) + 0.0


def optimal_hedge(pops: PopulationPair, spec: MarketSpec, psi_surface: PriceSurface,
                  survival_surface: PriceSurface, state: PortfolioState, strike: float,
                  units: float = 1.0, kind: str = "linear") -> HedgePosition:
    """Hedge position for a liability of ``units`` times the discounted ``psi_surface``.

    Pass the level-m surface with ``units=1`` for an exact m-life book, or the
    limit factor with ``units=m`` for the per-contract approximation.
    """
    disc = math.exp(-spec.r * (spec.maturity - state.time))
    _, dpsi = fd.lookup(psi_surface, state.lambda_p, state.time, kind)
    s_val, s_lam = qforward_value(pops.reference, spec, state.lambda_i, state.Lambda_i,
                                  state.time, survival_surface, strike, kind)
    pi = float(hedge_ratio(pops, spec, units * disc * dpsi, s_lam, state.lambda_p, state.lambda_i))
    return HedgePosition(qforward_units=pi, bond_units=0.0,
                         money_market=state.value - pi * s_val)


def _liability(surfaces: HedgeSurfaces, alive: np.ndarray, lam, t: float, kind: str):
    """Factor, lambda-derivative and last-death jump for books of ``alive`` lives."""
    if not surfaces.levels:
        v, d = fd.lookup(surfaces.beta, lam, t, kind)
        return alive * v, alive * d, np.where(alive > 0, v, 0.0)
    value = np.zeros(alive.shape)
    deriv = np.zeros(alive.shape)
    jump = np.zeros(alive.shape)
    for m in np.unique(alive):
        if m == 0:
            continue
        sel = alive == m
        v, d = fd.lookup(surfaces.levels[m - 1], lam[sel], t, kind)
        below = fd.lookup(surfaces.levels[m - 2], lam[sel], t, kind)[0] if m > 1 else 0.0
        value[sel], deriv[sel], jump[sel] = v, d, v - below
    return value, deriv, jump


@dataclass(frozen=True)
class HedgeReport:
    """First-step moments of the hedged book and their model counterparts.

    Drift and variance are annualized (divided by the step length).
    """

    rho: float
    n_insured: int
    alpha: float
    hedged: bool
    marking: str
    dt: float
    n_paths: int
    empirical_drift: float
    drift_se: float
    theory_drift: float
    empirical_var: float
    var_se: float
    theory_var: float
    empirical_sharpe: float
    sharpe_se: float
    theory_sharpe: float
    per_contract_var: float
    per_contract_price: float
    death_fraction: float
    death_fraction_se: float
    self_financing_residual: float
    degenerate_hedges: int


def _simulate_block(pops, spec, surfaces, n_steps, dt, seed, block, nb, hedge, kind):
    rng = mc.block_rng(seed, block)
    P, R = pops.insured, pops.reference
    n = surfaces.n_insured
    sq = math.sqrt(dt)
    lam_p = np.full(nb, pops.initial_insured)
    lam_i = np.full(nb, pops.initial_reference)
    big_lambda = np.zeros(nb)
    alive = np.full(nb, n, dtype=np.int64)
    t = 0.0

    degenerate = 0

    def mark(t, lam_p, lam_i, big_lambda, alive):
        nonlocal degenerate
        disc = math.exp(-spec.r * (spec.maturity - t))
        v, d, _ = _liability(surfaces, alive, lam_p, t, kind)
        s, s_lam = qforward_value(R, spec, lam_i, big_lambda, t, surfaces.survival,
                                  surfaces.strike, kind)
        if hedge and t < spec.maturity - 1e-12:
            pi = hedge_ratio(pops, spec, disc * d, s_lam, lam_p, lam_i, degenerate="zero")
            if spec.rho != 0.0:
                degenerate += int(np.count_nonzero(np.abs(s_lam) < SENS_TOL))
        else:
            # nothing left to hedge at maturity
            pi = np.zeros(nb)
        return disc * v, s, pi

    liab, s, pi = mark(t, lam_p, lam_i, big_lambda, alive)
    value = liab.copy()  # premium received, so the book starts at zero
    cash = value - pi * s
    first = None
    residual = 0.0
    growth = math.exp(spec.r * dt)
    for step in range(1, n_steps + 1):
        zp, zi = mc.correlated_normals(rng, spec.rho, nb)
        new_p = P.lambda_floor + (lam_p - P.lambda_floor) * np.exp(
            (P.a - 0.5 * P.b ** 2) * dt + P.b * sq * zp)
        new_i = R.lambda_floor + (lam_i - R.lambda_floor) * np.exp(
            (R.a - 0.5 * R.b ** 2) * dt + R.b * sq * zi)
        died = rng.binomial(alive, -np.expm1(-0.5 * dt * (lam_p + new_p)))
        big_lambda = big_lambda + 0.5 * dt * (lam_i + new_i)
        lam_p, lam_i, alive = new_p, new_i, alive - died
        t = step * dt
        new_liab, new_s, new_pi = mark(t, lam_p, lam_i, big_lambda, alive)
        new_value = cash * growth + pi * new_s
        gain = pi * (new_s - s) + cash * (growth - 1.0)
        scale = np.maximum(1.0, np.abs(value))
        residual = max(residual, float(np.max(np.abs(new_value - value - gain) / scale)))
        if first is None:
            first = (new_value - new_liab) - (value - liab)
        value, liab, s, pi = new_value, new_liab, new_s, new_pi
        cash = value - pi * s
    return first, (n - alive) / n, residual, degenerate


def theory_moments(pops: PopulationPair, spec: MarketSpec, surfaces: HedgeSurfaces,
                   hedge: bool = True, kind: str = "quadratic") -> tuple[float, float, float]:
    """Model drift, variance and liability at inception for the book.

    Returns ``(drift, variance, liability)``; the book value is zero, so the
    drift reduces to the loading plus any unhedged mortality-premium term.
    """
    n = surfaces.n_insured
    P, R = pops.insured, pops.reference
    disc = math.exp(-spec.r * spec.maturity)
    alive = np.array([n])
    v, d, jump = (float(x[0]) for x in _liability(
        surfaces, alive, np.array([pops.initial_insured]), 0.0, kind))
    liab, l_lam, l_jump = disc * v, disc * d, disc * jump
    _, s_lam = qforward_value(R, spec, pops.initial_reference, 0.0, 0.0, surfaces.survival,
                              surfaces.strike, kind)
    x_p = P.b * (pops.initial_insured - P.lambda_floor)
    x_i = R.b * (pops.initial_reference - R.lambda_floor)
    pi = float(hedge_ratio(pops, spec, l_lam, s_lam, pops.initial_insured,
                           pops.initial_reference)) if hedge else 0.0
    jump_var = n * pops.initial_insured * l_jump ** 2
    loaded_sd = math.sqrt((1 - spec.rho ** 2) * (x_p * l_lam) ** 2 + jump_var)
    var = ((x_p * l_lam) ** 2 + (pi * x_i * s_lam) ** 2
           - 2 * spec.rho * pi * x_p * l_lam * x_i * s_lam + jump_var)
    drift = (spec.alpha * loaded_sd + spec.q_mort * pi * x_i * s_lam
             - spec.rho * spec.q_mort * x_p * l_lam)
    return drift, var, liab


def _sharpe_se(x: np.ndarray, dt: float) -> float:
    # delta method for mean/sd with skewness and kurtosis corrections
    m = x.mean()
    c = x - m
    s2 = np.mean(c * c)
    if s2 <= 0:
        return 0.0
    s = math.sqrt(s2)
    g3 = np.mean(c ** 3) / s ** 3
    g4 = np.mean(c ** 4) / s2 ** 2
    ratio = m / s
    var = max(0.0, 1.0 - g3 * ratio + (g4 - 1.0) / 4.0 * ratio ** 2) / x.shape[0]
    return math.sqrt(var / dt)


def simulate_hedged_portfolio(pops: PopulationPair, spec: MarketSpec, n_insured: int,
                              surfaces: HedgeSurfaces, n_paths: int = 200_000, n_steps: int = 1,
                              seed: int = 0, dt: Optional[float] = None, hedge: bool = True,
                              kind: str = "quadratic", workers: Optional[int] = None) -> HedgeReport:
    """Simulate the rebalanced book under the physical measure.

    Parameters
    ----------
    n_insured : int
        Lives in the book; must match ``surfaces.n_insured``.
    n_steps : int
        Rebalancing steps. Moments are measured over the first step only;
        later steps feed the death-count and self-financing diagnostics.
    dt : float, optional
        Step length, defaulting to ``T / n_steps``.
    hedge : bool
        Hold the optimal q-forward position (False holds none).
    kind : str
        Interpolation used to mark surfaces (see :func:`fd.lookup`).

    Returns
    -------
    HedgeReport
    """
    model.validate(spec, pops)
    if n_insured != surfaces.n_insured:
        raise ValueError("surfaces were built for a different book size")
    if n_paths < 2 or n_steps < 1:
        raise ValueError("need n_paths >= 2 and n_steps >= 1")
    if dt is None:
        dt = spec.maturity / n_steps
    if n_steps * dt > spec.maturity * (1 + 1e-12):
        raise ValueError("simulation horizon exceeds maturity")

    sizes = mc.block_sizes(n_paths)

    def work(block, nb):
        return _simulate_block(pops, spec, surfaces, n_steps, dt, seed, block, nb, hedge, kind)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, range(len(sizes)), sizes))
    else:
        parts = [work(b, nb) for b, nb in enumerate(sizes)]
    inc = np.concatenate([p[0] for p in parts])
    deaths = np.concatenate([p[1] for p in parts])
    residual = max(p[2] for p in parts)
    degenerate = sum(p[3] for p in parts)

    drift = inc.mean() / dt
    c = inc - inc.mean()
    var_step = float(np.mean(c * c)) * n_paths / (n_paths - 1)
    var = var_step / dt
    var_se = math.sqrt(max(0.0, np.mean(c ** 4) - np.mean(c * c) ** 2) / n_paths) / dt
    sharpe = drift / math.sqrt(var) if var > 0 else float("nan")
    t_drift, t_var, liab = theory_moments(pops, spec, surfaces, hedge, kind)
    return HedgeReport(
        rho=spec.rho, n_insured=n_insured, alpha=spec.alpha, hedged=hedge,
        marking=surfaces.marking, dt=dt, n_paths=n_paths,
        empirical_drift=float(drift), drift_se=math.sqrt(var_step / n_paths) / dt,
        theory_drift=t_drift, empirical_var=var, var_se=var_se, theory_var=t_var,
        empirical_sharpe=float(sharpe), sharpe_se=_sharpe_se(inc, dt),
        theory_sharpe=t_drift / math.sqrt(t_var) if t_var > 0 else float("nan"),
        per_contract_var=var / n_insured ** 2, per_contract_price=liab / n_insured,
        death_fraction=float(deaths.mean()),
        death_fraction_se=float(deaths.std(ddof=1) / math.sqrt(n_paths)),
        self_financing_residual=residual, degenerate_hedges=degenerate)

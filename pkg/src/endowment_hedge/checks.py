"""Executable checks shared by the ``validate`` command and the test suite.

Each check reports an expected value, an observed value and a tolerance.
Nodewise inequalities are reported as their worst violation, so the
expected value is 0 and the check passes when the violation is within
tolerance.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import fd, mc, model
from .fd import Grid1D
from .model import MarketSpec, PopulationPair

BOUND_TOL = 1e-6
ORDER_TOL = 1e-8


@dataclass(frozen=True)
class Check:
    name: str
    expected: float
    observed: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(abs(self.observed - self.expected) <= self.tolerance)


def violation(lhs, rhs) -> float:
    """Largest amount by which ``lhs <= rhs`` fails (0 when it holds everywhere)."""
    return max(0.0, float(np.max(np.asarray(lhs) - np.asarray(rhs))))


def property_checks(pops: PopulationPair, spec: MarketSpec, grid: Grid1D, n_max: int = 5,
                    label: str = "") -> list[Check]:
    """Nodewise invariants of the level recursion and the limit factor."""
    tag = f"[{label}]" if label else ""
    levels = [s.values for s in fd.solve_psi_n(pops, spec, grid, n_max)]
    beta = fd.solve_beta(pops, spec, grid).values
    h_t = np.array([model.survivor_bound(spec, pops, spec.maturity - tau) for tau in grid.tau])
    out = []

    def add(name, viol, tol):
        out.append(Check(name + tag, 0.0, viol, tol))

    add("bounds", max(max(violation(-v, 0.0), violation(v, n * h_t[None, :]))
                      for n, v in enumerate(levels, 1)), BOUND_TOL)
    add("terminal", max(float(np.max(np.abs(v[:, 0] - n))) for n, v in enumerate(levels, 1)), 0.0)
    add("monotone_in_n", max([violation(levels[n - 2], levels[n - 1])
                              for n in range(2, n_max + 1)] or [0.0]), ORDER_TOL)
    smaller = dataclasses.replace(spec, alpha=0.5 * spec.alpha)
    low = fd.solve_psi_n(pops, smaller, grid, n_max)
    add("monotone_in_alpha", max(violation(lo.values, v) for lo, v in zip(low, levels)), ORDER_TOL)
    h = grid.h
    add("decreasing_in_lambda",
        max(violation((v[2:, :] - v[:-2, :]) / (2 * h), 0.0) for v in levels), BOUND_TOL)
    pairs = [(m, k) for m, k in ((1, 1), (1, 2), (2, 3)) if m + k <= n_max]
    add("subadditive", max([violation(levels[m + k - 1], levels[m - 1] + levels[k - 1])
                            for m, k in pairs] or [0.0]), ORDER_TOL)
    add("per_contract_nonincreasing",
        max([violation(levels[n] / (n + 1), levels[n - 1] / n) for n in range(1, n_max)] or [0.0]),
        ORDER_TOL)
    add("per_contract_above_limit",
        max(violation(beta, v / n) for n, v in enumerate(levels, 1)), ORDER_TOL)
    uncorrelated = dataclasses.replace(spec, rho=0.0)
    if spec.rho * spec.q_mort <= 0:
        ref = fd.solve_psi_n(pops, uncorrelated, grid, n_max)
        add("hedging_lowers_price", max(violation(v, r.values) for v, r in zip(levels, ref)),
            ORDER_TOL)
    if spec.rho > 0:
        higher = fd.solve_psi_n(pops, dataclasses.replace(spec, q_mort=spec.q_mort + 0.05),
                                grid, n_max)
        add("increasing_in_q", max(violation(v, hi.values) for v, hi in zip(levels, higher)),
            ORDER_TOL)
    shifted = fd.solve_psi_n(pops, dataclasses.replace(uncorrelated, q_mort=spec.q_mort + 0.1),
                             grid, n_max)
    plain = fd.solve_psi_n(pops, uncorrelated, grid, n_max)
    add("uncorrelated_ignores_q",
        max(float(np.max(np.abs(a.values - b.values))) for a, b in zip(shifted, plain)), 0.0)
    return out


def linearity_check(pops: PopulationPair, spec: MarketSpec, grid: Grid1D, n_max: int = 5) -> Check:
    """Without loading, n lives are worth n single lives."""
    zero = dataclasses.replace(spec, alpha=0.0)
    levels = fd.solve_psi_n(pops, zero, grid, n_max)
    base = levels[0].values
    err = max(float(np.max(np.abs(v.values - n * base))) / n for n, v in enumerate(levels, 1))
    return Check("zero_loading_linear", 0.0, err, ORDER_TOL)


def gap_bound_check(pops: PopulationPair, spec: MarketSpec, grid: Grid1D,
                    ns=(1, 2, 5, 10, 25), slack: float = 0.01) -> list[Check]:
    """``|psi^(n)/n - beta|`` against the uniform limit-gap bound at every node."""
    beta = fd.solve_beta(pops, spec, grid).values
    levels = fd.solve_psi_n(pops, spec, grid, max(ns))
    out = []
    for n in ns:
        gap = float(np.max(np.abs(levels[n - 1].values / n - beta)))
        bound = model.limit_gap_bound(spec, pops, n)
        out.append(Check(f"limit_gap[n={n}]", 0.0, max(0.0, gap - bound), slack))
    return out


def convergence_ratio(pops: PopulationPair, spec: MarketSpec, grid: Grid1D,
                      lam: Optional[float] = None) -> tuple[float, float, float]:
    """Successive price differences over grids refined by 2 and 4.

    Returns ``(d1, d2, d2 / d1)``.
    """
    lam = pops.initial_insured if lam is None else lam
    prices = [fd.price(fd.solve_psi_single(pops, spec, grid.refined(f)), spec, lam, 0.0)
              for f in (1, 2, 4)]
    d1 = abs(prices[1] - prices[0])
    d2 = abs(prices[2] - prices[1])
    return d1, d2, (d2 / d1 if d1 > 0 else math.inf)


def mc_checks(pops: PopulationPair, spec: MarketSpec, grid: Grid1D, n_paths: int, n_steps: int,
              seed: int, label: str = "") -> list[Check]:
    """PDE against Monte Carlo for every linear factor, each within 3 standard errors."""
    tag = f"[{label}]" if label else ""
    lam0 = pops.initial_insured
    zero = dataclasses.replace(spec, alpha=0.0)
    pde_a0, _ = fd.lookup(fd.solve_psi_single(pops, zero, grid), lam0, 0.0)
    est_a0 = mc.estimate_alpha0(pops, zero, lam0, n_paths, n_steps, seed)
    pde_b, _ = fd.lookup(fd.solve_beta(pops, spec, grid), lam0, 0.0)
    est_b = mc.estimate_beta(pops, spec, lam0, n_paths, n_steps, seed + 1)
    pde_k, _ = fd.lookup(fd.solve_survival_factor(pops.reference, spec, grid),
                         pops.initial_reference, 0.0)
    est_k = mc.estimate_qforward_strike(pops.reference, spec, pops.initial_reference,
                                        n_paths, n_steps, seed + 2)
    return [
        Check("mc_zero_loading" + tag, pde_a0, est_a0.mean, 3 * est_a0.std_error),
        Check("mc_limit_factor" + tag, pde_b, est_b.mean, 3 * est_b.std_error),
        Check("mc_reference_survival" + tag, pde_k, est_k.mean, 3 * est_k.std_error),
    ]

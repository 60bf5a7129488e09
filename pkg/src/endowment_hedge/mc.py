"""Monte Carlo Feynman-Kac estimators for the linear price factors.

The shifted hazard ``lambda - floor`` is a geometric Brownian motion, so each
step is sampled exactly in log space; only the time integral of the hazard
uses the trapezoid rule.

Random numbers come from Philox streams keyed by ``(seed, block)`` with a
fixed block size, and block statistics are merged in block order. Results
therefore depend only on ``(seed, n_paths, n_steps)``, not on the number of
worker threads.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import model
from .errors import InitialBelowFloor
from .model import HazardParams, MarketSpec, PopulationPair

BLOCK = 8192


class Measure(enum.Enum):
    PHYSICAL = "physical"
    RISK_NEUTRAL = "risk_neutral"
    TILTED = "tilted"


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_paths: int


@dataclass(frozen=True)
class PathBundle:
    """Hazard paths on a uniform time grid.

    Matrices have shape ``(n_paths, n_steps + 1)``; column 0 is the initial state.
    """

    times: np.ndarray
    lambda_p: np.ndarray
    lambda_i: np.ndarray
    integral_p: np.ndarray
    integral_i: np.ndarray
    seed: int


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Independent generator for one block of paths."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(block)])))


def block_sizes(n_paths: int) -> list[int]:
    full, rest = divmod(n_paths, BLOCK)
    return [BLOCK] * full + ([rest] if rest else [])


def measure_drifts(pops: PopulationPair, spec: MarketSpec, measure: Measure) -> tuple[float, float]:
    """Constant hazard drifts ``(insured, reference)`` under ``measure``.

    The tilt acts on the insured hazard only; the reference keeps its
    risk-neutral drift under the tilted measure.
    """
    if measure is Measure.PHYSICAL:
        return pops.insured.a, pops.reference.a
    a_p = model.risk_neutral_drift_P(pops, spec)
    a_i = model.risk_neutral_drift_I(pops, spec)
    if measure is Measure.TILTED:
        a_p -= model.sharpe_tilt(spec) * pops.insured.b
    return a_p, a_i


class _Running:
    """Mean and sum of squared deviations merged block by block (Chan et al.)."""

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0

    def add(self, x: np.ndarray) -> None:
        nb = x.shape[0]
        if nb == 0:
            return
        mb = float(np.mean(x))
        m2b = float(np.sum((x - mb) ** 2))
        tot = self.n + nb
        delta = mb - self.mean
        self.mean += delta * nb / tot
        self.m2 += m2b + delta * delta * self.n * nb / tot
        self.n = tot

    def estimate(self) -> McEstimate:
        var = self.m2 / (self.n - 1) if self.n > 1 else 0.0
        return McEstimate(self.mean, math.sqrt(var / self.n), self.n)


def _run_blocks(n_paths: int, worker: Callable[[int, int], np.ndarray],
                workers: Optional[int]) -> McEstimate:
    sizes = block_sizes(n_paths)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(worker, range(len(sizes)), sizes))
    else:
        parts = [worker(b, nb) for b, nb in enumerate(sizes)]
    acc = _Running()
    for part in parts:
        acc.add(part)
    return acc.estimate()


def _check_counts(n_paths: int, n_steps: int) -> None:
    if n_paths < 1 or n_steps < 1:
        raise ValueError("n_paths and n_steps must be >= 1")


def _discount_sampler(params: HazardParams, drift: float, lambda0: float, horizon: float,
                      n_steps: int, seed: int) -> Callable[[int, int], np.ndarray]:
    dt = horizon / n_steps
    mu = (drift - 0.5 * params.b ** 2) * dt
    sig = params.b * math.sqrt(dt)
    floor = params.lambda_floor

    def worker(block: int, nb: int) -> np.ndarray:
        rng = block_rng(seed, block)
        x = np.full(nb, lambda0 - floor)
        prev = np.full(nb, lambda0)
        integral = np.zeros(nb)
        for _ in range(n_steps):
            x *= np.exp(mu + sig * rng.standard_normal(nb))
            lam = floor + x
            integral += 0.5 * dt * (prev + lam)
            prev = lam
        return np.exp(-integral)

    return worker


def estimate_survival(params: HazardParams, drift: float, lambda0: float, horizon: float,
                      n_paths: int = 200_000, n_steps: int = 500, seed: int = 0,
                      workers: Optional[int] = None) -> McEstimate:
    """Estimate ``E[exp(-int_0^horizon lambda ds)]`` for a hazard with constant ``drift``."""
    _check_counts(n_paths, n_steps)
    if not lambda0 > params.lambda_floor:
        raise InitialBelowFloor(f"initial hazard {lambda0} must exceed floor")
    worker = _discount_sampler(params, drift, lambda0, horizon, n_steps, seed)
    return _run_blocks(n_paths, worker, workers)


def estimate_alpha0(pops: PopulationPair, spec: MarketSpec, lambda_p0: float,
                    n_paths: int = 200_000, n_steps: int = 500, seed: int = 0,
                    workers: Optional[int] = None) -> McEstimate:
    """Risk-neutral survival probability of one insured (the zero-loading factor)."""
    model.validate(spec, pops)
    drift, _ = measure_drifts(pops, spec, Measure.RISK_NEUTRAL)
    return estimate_survival(pops.insured, drift, lambda_p0, spec.maturity,
                             n_paths, n_steps, seed, workers)


def estimate_beta(pops: PopulationPair, spec: MarketSpec, lambda_p0: float,
                  n_paths: int = 200_000, n_steps: int = 500, seed: int = 0,
                  workers: Optional[int] = None) -> McEstimate:
    """Survival probability under the tilted measure (the per-contract limit factor)."""
    model.validate(spec, pops)
    drift, _ = measure_drifts(pops, spec, Measure.TILTED)
    return estimate_survival(pops.insured, drift, lambda_p0, spec.maturity,
                             n_paths, n_steps, seed, workers)


def estimate_qforward_strike(reference: HazardParams, spec: MarketSpec, lambda_i0: float,
                             n_paths: int = 200_000, n_steps: int = 500, seed: int = 0,
                             workers: Optional[int] = None) -> McEstimate:
    """Delivery price ``K = E^Q[exp(-int_0^T lambda^I ds)]``."""
    drift = reference.a - spec.q_mort * reference.b
    return estimate_survival(reference, drift, lambda_i0, spec.maturity,
                             n_paths, n_steps, seed, workers)


def correlated_normals(rng: np.random.Generator, rho: float, nb: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``(z_p, z_i)`` with ``z_p = rho z_i + sqrt(1 - rho^2) z_perp``."""
    z = rng.standard_normal((2, nb))
    z_i = z[0]
    return rho * z_i + math.sqrt(max(0.0, 1.0 - rho * rho)) * z[1], z_i


def simulate_paths(pops: PopulationPair, spec: MarketSpec, measure: Measure, n_paths: int,
                   n_steps: int, horizon: float, seed: int = 0) -> PathBundle:
    """Simulate both hazards with full path storage.

    Intended for inspection and moderate sizes; the estimators stream instead.
    """
    model.validate(spec, pops)
    _check_counts(n_paths, n_steps)
    a_p, a_i = measure_drifts(pops, spec, measure)
    dt = horizon / n_steps
    sq = math.sqrt(dt)
    P, R = pops.insured, pops.reference
    lam_p = np.empty((n_paths, n_steps + 1))
    lam_i = np.empty((n_paths, n_steps + 1))
    lam_p[:, 0] = pops.initial_insured
    lam_i[:, 0] = pops.initial_reference
    start = 0
    for block, nb in enumerate(block_sizes(n_paths)):
        rng = block_rng(seed, block)
        sl = slice(start, start + nb)
        xp = np.full(nb, pops.initial_insured - P.lambda_floor)
        xi = np.full(nb, pops.initial_reference - R.lambda_floor)
        for s in range(1, n_steps + 1):
            zp, zi = correlated_normals(rng, spec.rho, nb)
            xp *= np.exp((a_p - 0.5 * P.b ** 2) * dt + P.b * sq * zp)
            xi *= np.exp((a_i - 0.5 * R.b ** 2) * dt + R.b * sq * zi)
            lam_p[sl, s] = P.lambda_floor + xp
            lam_i[sl, s] = R.lambda_floor + xi
        start += nb

    def trap(lam):
        out = np.zeros_like(lam)
        np.cumsum(0.5 * dt * (lam[:, 1:] + lam[:, :-1]), axis=1, out=out[:, 1:])
        return out
    return PathBundle(times=dt * np.arange(n_steps + 1), lambda_p=lam_p, lambda_i=lam_i,
                      integral_p=trap(lam_p), integral_i=trap(lam_i), seed=int(seed))

"""Model parameters, validation, measure-change drifts and closed-form bounds.

Hazard rates follow

    d lambda_t = a (lambda_t - floor) dt + b (lambda_t - floor) dW_t

with constant ``a`` and ``b``, so ``lambda_t - floor`` is a geometric Brownian
motion. The short rate is a constant ``r``; the T-bond is therefore the
deterministic discount factor ``exp(-r (T - t))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import (
    AlphaTooLarge,
    ConfigurationError,
    DegenerateBound,
    InitialBelowFloor,
    NonPositiveVolatility,
    RhoOutOfRange,
)


@dataclass(frozen=True)
class HazardParams:
    """Constant-coefficient hazard diffusion for one population.

    a : drift coefficient (1/year)
    b : volatility coefficient (1/sqrt(year)), must be positive
    lambda_floor : minimum hazard rate, must be positive
    """

    a: float
    b: float
    lambda_floor: float


@dataclass(frozen=True)
class MarketSpec:
    r: float
    q_mort: float
    alpha: float
    rho: float
    maturity: float


@dataclass(frozen=True)
class PopulationPair:
    insured: HazardParams
    reference: HazardParams
    initial_insured: float
    initial_reference: float


def default_parameters(lambda_p0: float = 0.06, *, rho: float = 0.0, q_mort: float = 0.0,
                   alpha: float = 0.1) -> tuple[MarketSpec, PopulationPair]:
    """Default study parameters with a reference population mirroring the insured one.

    T = 10, r = 0.04, a = 0.04, b = 0.1, floor = 0.02 and alpha = 0.1.
    """
    insured = HazardParams(a=0.04, b=0.1, lambda_floor=0.02)
    spec = MarketSpec(r=0.04, q_mort=q_mort, alpha=alpha, rho=rho, maturity=10.0)
    pops = PopulationPair(insured=insured, reference=insured,
                          initial_insured=lambda_p0, initial_reference=lambda_p0)
    return spec, pops


def _check_hazard(params: HazardParams, initial: float, label: str) -> None:
    if not params.b > 0:
        raise NonPositiveVolatility(f"{label}: volatility b={params.b!r} must be > 0")
    if not params.lambda_floor > 0:
        raise ConfigurationError(f"{label}: floor {params.lambda_floor!r} must be > 0")
    if not math.isfinite(params.a):
        raise ConfigurationError(f"{label}: drift a={params.a!r} must be finite")
    if not initial > params.lambda_floor:
        raise InitialBelowFloor(
            f"{label}: initial hazard {initial!r} must exceed floor {params.lambda_floor!r}")


def validate(spec: MarketSpec, pops: PopulationPair) -> tuple[MarketSpec, PopulationPair]:
    """Return ``(spec, pops)`` unchanged if every invariant holds, else raise."""
    _check_hazard(pops.insured, pops.initial_insured, "insured")
    _check_hazard(pops.reference, pops.initial_reference, "reference")
    if not -1.0 <= spec.rho <= 1.0:
        raise RhoOutOfRange(f"rho={spec.rho!r} must lie in [-1, 1]")
    if not spec.alpha >= 0:
        raise ConfigurationError(f"alpha={spec.alpha!r} must be >= 0")
    if spec.alpha > math.sqrt(pops.insured.lambda_floor):
        raise AlphaTooLarge(
            f"alpha={spec.alpha!r} exceeds sqrt(insured floor)="
            f"{math.sqrt(pops.insured.lambda_floor):.6g}")
    if not spec.r >= 0:
        raise ConfigurationError(f"r={spec.r!r} must be >= 0")
    if not spec.maturity > 0:
        raise ConfigurationError(f"maturity={spec.maturity!r} must be > 0")
    if not math.isfinite(spec.q_mort):
        raise ConfigurationError(f"q_mort={spec.q_mort!r} must be finite")
    return spec, pops


def risk_neutral_drift_P(pops: PopulationPair, spec: MarketSpec) -> float:
    """Insured hazard drift under Q: ``a^P - rho q b^P``."""
    return pops.insured.a - spec.rho * spec.q_mort * pops.insured.b


def risk_neutral_drift_I(pops: PopulationPair, spec: MarketSpec) -> float:
    """Reference hazard drift under Q: ``a^I - q b^I``."""
    return pops.reference.a - spec.q_mort * pops.reference.b


def sharpe_tilt(spec: MarketSpec) -> float:
    """Drift reduction per unit volatility under the tilted measure."""
    return spec.alpha * math.sqrt(max(0.0, 1.0 - spec.rho * spec.rho))


def effective_limit_drift(pops: PopulationPair, spec: MarketSpec) -> float:
    """Drift of the insured hazard in the linear PDE for the limiting price."""
    return pops.insured.a - (spec.rho * spec.q_mort + sharpe_tilt(spec)) * pops.insured.b


def survivor_bound(spec: MarketSpec, pops: PopulationPair, t: float) -> float:
    """Upper bound ``h(t)`` on the per-contract mortality factor."""
    floor = pops.insured.lambda_floor
    return math.exp(-(floor - spec.alpha * math.sqrt(floor)) * (spec.maturity - t))


def limit_gap_constant(spec: MarketSpec, pops: PopulationPair) -> float:
    root = math.sqrt(2.0 * pops.insured.lambda_floor)
    if root <= spec.alpha:
        raise DegenerateBound(
            f"sqrt(2 * floor)={root:.6g} <= alpha={spec.alpha!r}; gap bound is vacuous")
    return spec.alpha * math.sqrt(2.0) / (root - spec.alpha)


def limit_gap_bound(spec: MarketSpec, pops: PopulationPair, n: int) -> float:
    """Uniform bound on ``|psi^(n)/n - beta|``: ``1/n + 2 J / sqrt(n)``."""
    if n < 1:
        raise ValueError(f"n={n!r} must be >= 1")
    J = limit_gap_constant(spec, pops)
    return 1.0 / n + 2.0 * J / math.sqrt(n)

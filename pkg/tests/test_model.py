import dataclasses
import math

import pytest
from hypothesis import given, strategies as st

from endowment_hedge import model
from endowment_hedge.errors import (
    AlphaTooLarge,
    DegenerateBound,
    InitialBelowFloor,
    NonPositiveVolatility,
    RhoOutOfRange,
)
from endowment_hedge.model import HazardParams, default_parameters


def with_spec(**kw):
    spec, pops = default_parameters(0.06)
    return dataclasses.replace(spec, **kw), pops


def test_validate_accepts_default_loading():
    spec, pops = default_parameters(0.06)
    assert model.validate(spec, pops) == (spec, pops)


def test_validate_accepts_zero_alpha():
    spec, pops = with_spec(alpha=0.0)
    model.validate(spec, pops)


def test_alpha_above_root_floor_rejected():
    spec, pops = with_spec(alpha=0.15)
    with pytest.raises(AlphaTooLarge):
        model.validate(spec, pops)


@pytest.mark.parametrize("rho", [-1.0001, 1.5])
def test_rho_out_of_range(rho):
    spec, pops = with_spec(rho=rho)
    with pytest.raises(RhoOutOfRange):
        model.validate(spec, pops)


def test_non_positive_volatility():
    spec, pops = default_parameters(0.06)
    pops = dataclasses.replace(pops, reference=HazardParams(0.04, 0.0, 0.02))
    with pytest.raises(NonPositiveVolatility):
        model.validate(spec, pops)


@pytest.mark.parametrize("lam0", [0.02, 0.01])
def test_initial_at_or_below_floor(lam0):
    spec, pops = default_parameters(lam0)
    with pytest.raises(InitialBelowFloor):
        model.validate(spec, pops)


def test_risk_neutral_drift_values():
    spec, pops = with_spec(rho=0.0, q_mort=0.3)
    assert model.risk_neutral_drift_P(pops, spec) == pops.insured.a
    spec, pops = with_spec(rho=1.0, q_mort=0.15)
    assert model.risk_neutral_drift_P(pops, spec) == pytest.approx(0.025, abs=1e-15)
    spec, pops = with_spec(rho=0.8, q_mort=-0.05)
    assert model.risk_neutral_drift_P(pops, spec) == pytest.approx(0.044, abs=1e-15)


def test_reference_drift():
    spec, pops = with_spec(q_mort=0.15)
    assert model.risk_neutral_drift_I(pops, spec) == pytest.approx(0.025, abs=1e-15)


def test_effective_limit_drift_values():
    spec, pops = with_spec(rho=0.0)
    assert model.effective_limit_drift(pops, spec) == pytest.approx(0.03, abs=1e-15)
    spec, pops = with_spec(rho=1.0, q_mort=0.07)
    assert model.effective_limit_drift(pops, spec) == pytest.approx(0.04 - 0.07 * 0.1, abs=1e-15)
    spec, pops = with_spec(rho=0.0, alpha=0.0)
    assert model.effective_limit_drift(pops, spec) == pops.insured.a


def test_survivor_bound_values():
    spec, pops = default_parameters(0.06)
    assert model.survivor_bound(spec, pops, spec.maturity) == 1.0
    assert model.survivor_bound(spec, pops, 0.0) == pytest.approx(0.9431040682, abs=1e-10)
    spec0 = dataclasses.replace(spec, alpha=0.0)
    assert model.survivor_bound(spec0, pops, 0.0) == pytest.approx(0.8187307531, abs=1e-10)


def test_limit_gap_bound_values():
    spec, pops = default_parameters(0.06)
    assert model.limit_gap_constant(spec, pops) == pytest.approx(1.41421356, abs=1e-8)
    assert model.limit_gap_bound(spec, pops, 100) == pytest.approx(0.29284271, abs=1e-8)
    spec0 = dataclasses.replace(spec, alpha=0.0)
    assert model.limit_gap_bound(spec0, pops, 7) == pytest.approx(1 / 7, abs=1e-15)


def test_limit_gap_bound_degenerate():
    spec, pops = default_parameters(0.06)
    spec = dataclasses.replace(spec, alpha=0.2)
    with pytest.raises(DegenerateBound):
        model.limit_gap_bound(spec, pops, 3)


def test_limit_gap_bound_requires_positive_n():
    spec, pops = default_parameters(0.06)
    with pytest.raises(ValueError):
        model.limit_gap_bound(spec, pops, 0)


@given(a1=st.floats(0, 0.14), a2=st.floats(0, 0.14), rho=st.floats(-0.99, 0.99),
       q=st.floats(-0.3, 0.3))
def test_effective_drift_decreasing_in_alpha(a1, a2, rho, q):
    lo, hi = sorted((a1, a2))
    s_lo, pops = with_spec(alpha=lo, rho=rho, q_mort=q)
    s_hi, _ = with_spec(alpha=hi, rho=rho, q_mort=q)
    assert model.effective_limit_drift(pops, s_hi) <= model.effective_limit_drift(pops, s_lo)


@given(rho=st.floats(-1, 1), q=st.floats(-0.3, 0.3))
def test_effective_drift_matches_risk_neutral_without_loading(rho, q):
    spec, pops = with_spec(alpha=0.0, rho=rho, q_mort=q)
    assert model.effective_limit_drift(pops, spec) == pytest.approx(
        model.risk_neutral_drift_P(pops, spec), abs=1e-15)


@given(t1=st.floats(0, 10), t2=st.floats(0, 10), alpha=st.floats(0, math.sqrt(0.02)))
def test_survivor_bound_monotone_in_time(t1, t2, alpha):
    spec, pops = with_spec(alpha=alpha)
    lo, hi = sorted((t1, t2))
    b_lo = model.survivor_bound(spec, pops, lo)
    b_hi = model.survivor_bound(spec, pops, hi)
    assert 0 < b_lo <= b_hi <= 1.0


@given(n=st.integers(1, 10_000), alpha=st.floats(0, 0.14))
def test_gap_bound_strictly_decreasing(n, alpha):
    spec, pops = with_spec(alpha=alpha)
    assert model.limit_gap_bound(spec, pops, n + 1) < model.limit_gap_bound(spec, pops, n)


def test_gap_bound_vanishes():
    spec, pops = default_parameters(0.06)
    assert model.limit_gap_bound(spec, pops, 10 ** 12) < 1e-5

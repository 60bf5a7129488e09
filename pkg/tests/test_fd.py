import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from endowment_hedge import checks, fd, model
from endowment_hedge.errors import NonConvergedGrid, NonPositiveDimension, OutOfDomain
from endowment_hedge.model import default_parameters


def test_default_grid_steps():
    g = fd.build_grid(8.0, 640, 1000, 10.0)
    assert g.h == pytest.approx(0.025, abs=1e-15)
    assert g.k == pytest.approx(0.01, abs=1e-15)
    assert g.y[0] == -8.0 and g.y[-1] == pytest.approx(8.0, abs=1e-12)


def test_smallest_grid():
    g = fd.build_grid(1.0, 2, 1, 1.0)
    assert (g.h, g.k) == (1.0, 1.0)


@pytest.mark.parametrize("args", [(8, 0, 10, 10), (8, 1, 10, 10), (8, 10, 0, 10),
                                  (0, 10, 10, 10), (8, 10, 10, 0)])
def test_degenerate_grid(args):
    with pytest.raises(NonPositiveDimension):
        fd.build_grid(*args)


def test_terminal_slices_exact(base, grid):
    spec, pops = base
    for surf in (fd.solve_psi_single(pops, spec, grid), fd.solve_beta(pops, spec, grid),
                 fd.solve_survival_factor(pops.reference, spec, grid)):
        assert np.all(surf.values[:, 0] == 1.0)
    levels = fd.solve_psi_n(pops, spec, grid, 3)
    assert np.all(levels[2].values[:, 0] == 3.0)


def test_left_boundary_matches_survivor_bound(base, grid):
    spec, pops = base
    surf = fd.solve_psi_single(pops, spec, grid)
    assert surf.values[0, -1] == pytest.approx(0.9431040682, abs=1e-9)
    assert surf.values[0, -1] == pytest.approx(model.survivor_bound(spec, pops, 0.0), abs=1e-12)


def test_surfaces_read_only(base, coarse_grid):
    spec, pops = base
    surf = fd.solve_psi_single(pops, spec, coarse_grid)
    with pytest.raises(ValueError):
        surf.values[1, 1] = 0.0


def test_level_one_bitwise_identical(base, grid):
    spec, pops = base
    single = fd.solve_psi_single(pops, spec, grid)
    first = fd.solve_psi_n(pops, spec, grid, 4)[0]
    assert np.array_equal(single.values, first.values)


def test_zero_loading_is_linear_in_n(grid):
    spec, pops = default_parameters(0.06, alpha=0.0, rho=0.5, q_mort=0.05)
    levels = fd.solve_psi_n(pops, spec, grid, 6)
    base = levels[0].values
    scale = np.max(base)
    for n, surf in enumerate(levels, 1):
        assert np.max(np.abs(surf.values - n * base)) <= 1e-8 * n * scale


def test_per_contract_price_at_fifty_below_single(base, grid):
    spec, pops = base
    levels = fd.solve_psi_n(pops, spec, grid, 50)
    assert np.all(levels[49].values / 50 <= levels[0].values + 1e-12)


def test_boundary_chain_closed_form_row():
    tau = np.linspace(0, 10, 11)
    chain = fd.boundary_chain(0.02, 0.1, tau, 3)
    c1 = 0.02 - 0.1 * math.sqrt(0.02)
    np.testing.assert_array_equal(chain[0], np.exp(-c1 * tau))
    np.testing.assert_array_equal(chain[:, 0], [1.0, 2.0, 3.0])
    # zero loading keeps the chain proportional to the single-life edge
    flat = fd.boundary_chain(0.02, 0.0, tau, 4)
    np.testing.assert_allclose(flat, np.arange(1, 5)[:, None] * np.exp(-0.02 * tau), rtol=1e-12)


def test_boundary_chain_uneven_times():
    tau = np.array([0.0, 0.5, 3.0])
    even = fd.boundary_chain(0.02, 0.1, np.linspace(0, 3, 7), 3)
    uneven = fd.boundary_chain(0.02, 0.1, tau, 3)
    np.testing.assert_allclose(uneven[:, 2], even[:, 6], rtol=1e-12)


def test_beta_range(base, grid):
    spec, pops = base
    beta = fd.solve_beta(pops, spec, grid)
    h_t = np.array([model.survivor_bound(spec, pops, spec.maturity - t) for t in grid.tau])
    assert np.all(beta.values >= 0)
    assert np.all(beta.values <= h_t[None, :] + 1e-12)
    assert fd.lookup(beta, 0.06, 0.0)[0] > 0


def test_beta_decreasing_in_effective_drift(grid):
    spec_lo, pops = default_parameters(0.06, rho=0.5, q_mort=0.15)
    spec_hi, _ = default_parameters(0.06, rho=0.5, q_mort=-0.15)
    assert model.effective_limit_drift(pops, spec_lo) < model.effective_limit_drift(pops, spec_hi)
    lo = fd.solve_beta(pops, spec_lo, grid).values
    hi = fd.solve_beta(pops, spec_hi, grid).values
    assert np.all(lo >= hi - 1e-12)


def test_survival_factor_equals_unloaded_beta(grid):
    spec, pops = default_parameters(0.06, alpha=0.0, rho=0.0, q_mort=0.0)
    phi = fd.solve_survival_factor(pops.reference, spec, grid)
    beta = fd.solve_beta(pops, spec, grid)
    assert np.array_equal(phi.values, beta.values)


def test_lookup_on_node(base, coarse_grid):
    spec, pops = base
    surf = fd.solve_psi_single(pops, spec, coarse_grid)
    g = coarse_grid
    i, j = 57, 120
    lam = pops.insured.lambda_floor + math.exp(g.y[i])
    t = spec.maturity - g.tau[j]
    for kind in ("linear", "quadratic"):
        v, d = fd.lookup(surf, lam, t, kind)
        assert v == pytest.approx(surf.values[i, j], rel=1e-12)
        central = (surf.values[i + 1, j] - surf.values[i - 1, j]) / (2 * g.h) / math.exp(g.y[i])
        assert d == pytest.approx(central, rel=1e-9)


def test_lookup_at_maturity_is_one(base, grid):
    spec, pops = base
    surf = fd.solve_psi_single(pops, spec, grid)
    v, _ = fd.lookup(surf, np.array([0.021, 0.06, 0.5]), spec.maturity)
    np.testing.assert_array_equal(v, 1.0)


def test_lookup_derivative_non_positive(base, grid):
    spec, pops = base
    surf = fd.solve_psi_single(pops, spec, grid)
    lam = 0.02 + np.exp(np.linspace(-7.9, 7.9, 400))
    for t in (0.0, 3.3, 9.99):
        for kind in ("linear", "quadratic"):
            _, d = fd.lookup(surf, lam, t, kind)
            assert np.all(d <= 1e-6)


@pytest.mark.parametrize("lam,t", [(0.02, 0.0), (0.01, 0.0), (0.02 + math.exp(8.5), 0.0),
                                   (0.06, -0.1), (0.06, 10.5)])
def test_lookup_out_of_domain(base, coarse_grid, lam, t):
    spec, pops = base
    surf = fd.solve_psi_single(pops, spec, coarse_grid)
    with pytest.raises(OutOfDomain):
        fd.lookup(surf, lam, t)


def test_lookup_unknown_kind(base, coarse_grid):
    spec, pops = base
    surf = fd.solve_psi_single(pops, spec, coarse_grid)
    with pytest.raises(ValueError):
        fd.lookup(surf, 0.06, 0.0, kind="cubic")


def test_price_discounting(base, grid):
    spec, pops = base
    surf = fd.solve_psi_single(pops, spec, grid)
    assert fd.price(surf, spec, 0.06, spec.maturity) == 1.0
    factor, _ = fd.lookup(surf, 0.06, 0.0)
    assert fd.price(surf, spec, 0.06, 0.0) == pytest.approx(0.67032005 * factor, rel=1e-8)


def test_single_price_near_target_level(base, grid):
    spec, pops = base
    assert abs(fd.price(fd.solve_psi_single(pops, spec, grid), spec, 0.06, 0.0) - 0.435) < 0.01


def test_unstable_grid_detected():
    spec, pops = default_parameters(0.06, rho=1.0, q_mort=-5.0)
    with pytest.raises(NonConvergedGrid):
        fd.solve_psi_single(pops, spec, fd.build_grid(8, 16, 10))


def test_grid_maturity_must_match(base):
    spec, pops = base
    with pytest.raises(ValueError):
        fd.solve_beta(pops, spec, fd.build_grid(8, 64, 10, 5.0))


def test_frozen_regression_values(base, grid):
    # values of the default grid, pinned to catch unintended scheme changes
    spec, pops = base
    single = fd.price(fd.solve_psi_single(pops, spec, grid), spec, 0.06, 0.0)
    limit = fd.price(fd.solve_beta(pops, spec, grid), spec, 0.06, 0.0)
    assert single == pytest.approx(0.437964026141, abs=1e-10)
    assert limit == pytest.approx(0.345636809252, abs=1e-10)


@pytest.mark.parametrize("rho,q", [(0.5, 0.05), (-0.5, 0.15), (1.0, -0.05)])
def test_property_suite(rho, q, grid):
    spec, pops = default_parameters(0.06, rho=rho, q_mort=q)
    result = checks.property_checks(pops, spec, grid, 5)
    failed = [c for c in result if not c.passed]
    assert not failed, failed


@settings(max_examples=15, deadline=None)
@given(rho=st.floats(-1, 1), q=st.floats(-0.2, 0.2), alpha=st.floats(0, math.sqrt(0.02)))
def test_property_suite_random_parameters(rho, q, alpha, coarse_grid):
    spec, pops = default_parameters(0.06, rho=rho, q_mort=q, alpha=alpha)
    result = checks.property_checks(pops, spec, coarse_grid, 3)
    failed = [c for c in result if not c.passed]
    assert not failed, failed


def test_limit_gap_bound_holds(base, grid):
    spec, pops = base
    assert all(c.passed for c in checks.gap_bound_check(pops, spec, grid, ns=(1, 2, 5)))


def test_grid_refinement_shrinks_error(base):
    spec, pops = base
    d1, d2, ratio = checks.convergence_ratio(pops, spec, fd.build_grid(8, 160, 250))
    assert d2 < d1
    assert 0.3 <= ratio <= 0.7

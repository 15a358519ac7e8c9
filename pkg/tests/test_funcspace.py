import math

import numpy as np
import pytest

from scalevar import (
    DomainError,
    GridError,
    NumericalError,
    Path,
    ValidationError,
    delta,
    estimate_holder,
    make_grid,
    mean_function,
    sample,
    weierstrass,
)

LN2_OVER_LN3 = math.log(2.0) / math.log(3.0)


# ---------------------------------------------------------------------------
# grids


def test_grid_with_padding():
    g = make_grid(0.0, 1.0, 10, 0.2)
    assert g.h == pytest.approx(0.1)
    assert g.pad_steps == 2
    assert g.num_nodes == 15
    assert g.node(0) == pytest.approx(-0.2)
    assert g.node(g.num_nodes - 1) == pytest.approx(1.2)


def test_grid_without_padding():
    g = make_grid(0.0, 1.0, 10, 0.0)
    assert g.num_nodes == 11
    assert g.node(0) == 0.0
    assert g.node(10) == pytest.approx(1.0)


def test_grid_pad_rounds_half_up():
    # pad 0.25 at h = 0.1 rounds to 3 steps per side
    g = make_grid(0.0, 1.0, 10, 0.25)
    assert g.pad_steps == 3
    assert g.num_nodes == 17


def test_grid_nodes_affine_spacing():
    # affine node computation: every gap matches h to a few ulps of the
    # intermediate magnitude |t - a| + |a| (the scale the rounding happens at)
    g = make_grid(-0.3, 2.7, 977, 0.05)
    ts = g.nodes()
    gaps = np.diff(ts)
    bound = 4.0 * np.spacing(np.abs(ts[1:] - g.a) + abs(g.a) + g.h)
    assert np.all(np.abs(gaps - g.h) <= bound)


def test_grid_rejects_bad_parameters():
    with pytest.raises(ValidationError):
        make_grid(1.0, 0.0, 10, 0.0)
    with pytest.raises(ValidationError):
        make_grid(0.0, 1.0, 1, 0.0)
    with pytest.raises(ValidationError):
        make_grid(0.0, 1.0, 10, -0.1)
    with pytest.raises(ValidationError):
        make_grid(0.0, math.inf, 10, 0.0)
    with pytest.raises(ValidationError):
        make_grid(0.0, 1.0, 10.5, 0.0)


def test_grid_index_and_steps():
    g = make_grid(0.0, 1.0, 10, 0.2)
    assert g.index_of(0.0) == 2
    assert g.index_of(1.2) == 14
    with pytest.raises(GridError):
        g.index_of(0.05)
    assert g.steps_of(0.3) == 3
    with pytest.raises(GridError):
        g.steps_of(0.25)
    with pytest.raises(GridError):
        g.steps_of(0.0)


# ---------------------------------------------------------------------------
# paths


def test_sampled_path_is_node_only():
    g = make_grid(0.0, 1.0, 4, 0.0)
    p = Path.from_samples(g, np.arange(5, dtype=float))
    assert p.at(0.25)[0] == 1.0  # the value stored at node index 1
    with pytest.raises(GridError):
        p.at(0.1)


def test_sampled_path_rejects_nonfinite():
    g = make_grid(0.0, 1.0, 4, 0.0)
    vals = np.ones(5, dtype=complex)
    vals[2] = np.nan
    with pytest.raises(NumericalError):
        Path.from_samples(g, vals)


def test_analytic_path_domain_checked():
    p = Path.from_callable(lambda t: t, domain=(0.0, 1.0))
    assert p.at(1.0)[0] == 1.0
    with pytest.raises(DomainError):
        p.at(1.5)


def test_sample_respects_padding():
    g = make_grid(0.0, 1.0, 10, 0.2)
    p = sample(Path.from_callable(lambda t: 3.0 * t), g)
    assert p.is_sampled
    assert p.values.shape == (15, 1)
    assert p.at(-0.2)[0] == pytest.approx(-0.6)


# ---------------------------------------------------------------------------
# weierstrass generator


def test_weierstrass_metadata_and_truncation():
    w = weierstrass(0.5, 3.0, 1e-12)
    assert w.meta["holder_alpha"] == pytest.approx(LN2_OVER_LN3, abs=1e-15)
    # minimal term count: 0.5^N / (1 - 0.5) < tol first at N = 41
    assert w.meta["series_terms"] == 41
    coarse = weierstrass(0.5, 3.0, 1e-4)
    assert coarse.meta["series_terms"] == 15
    ts = np.linspace(0.0, 1.0, 257)
    gap = np.max(np.abs(w.at_many(ts) - coarse.at_many(ts)))
    assert gap < 1e-4


def test_weierstrass_boundary_exponent_one():
    # a*b = 1 is allowed and tags exponent 1
    w = weierstrass(0.5, 2.0, 1e-12)
    assert w.meta["holder_alpha"] == pytest.approx(1.0)


def test_weierstrass_rejects_bad_parameters():
    with pytest.raises(ValidationError):
        weierstrass(1.5, 3.0, 1e-12)
    with pytest.raises(ValidationError):
        weierstrass(0.5, 0.9, 1e-12)
    with pytest.raises(ValidationError):
        weierstrass(0.2, 3.0, 1e-12)  # a*b < 1
    with pytest.raises(ValidationError):
        weierstrass(0.5, 3.0, 0.0)


def test_weierstrass_deterministic():
    ts = np.linspace(-0.7, 1.9, 1001)
    v1 = weierstrass(0.5, 3.0, 1e-12).at_many(ts)
    v2 = weierstrass(0.5, 3.0, 1e-12).at_many(ts)
    assert np.array_equal(v1, v2)


# ---------------------------------------------------------------------------
# Holder exponent estimation


def test_holder_of_linear_path():
    p = Path.from_callable(lambda t: t, domain=(0.0, 1.0))
    est = estimate_holder(p, [0.1, 0.05, 0.025], 400)
    assert abs(est.alpha - 1.0) < 0.05
    assert est.delta_range == (0.025, 0.1)


def test_holder_of_weierstrass_analytic():
    w = weierstrass(0.5, 3.0, 1e-12)
    est = estimate_holder(w, [3.0**-j for j in range(2, 8)], 600)
    assert abs(est.alpha - LN2_OVER_LN3) < 0.1
    assert est.fit_residual >= 0.0


def test_holder_of_weierstrass_sampled():
    n = 3**6
    g = make_grid(0.0, 1.0, n, 0.0)
    p = sample(weierstrass(0.5, 3.0, 1e-12), g)
    deltas = [3.0**-j for j in range(2, 7)]  # all whole multiples of h = 3^-6
    est = estimate_holder(p, deltas, 400)
    assert abs(est.alpha - LN2_OVER_LN3) < 0.1


def test_holder_degenerate_on_constant_path():
    p = Path.from_callable(lambda t: 4.0, domain=(0.0, 1.0))
    with pytest.raises(NumericalError, match="degenerate oscillation"):
        estimate_holder(p, [0.1, 0.05, 0.025], 100)


def test_holder_needs_three_deltas():
    p = Path.from_callable(lambda t: t, domain=(0.0, 1.0))
    with pytest.raises(ValidationError):
        estimate_holder(p, [0.1, 0.05], 100)


def test_holder_delta_exits_domain():
    p = Path.from_callable(lambda t: t, domain=(0.0, 1.0))
    with pytest.raises(DomainError):
        estimate_holder(p, [2.0, 1.5, 1.2], 100)


# ---------------------------------------------------------------------------
# mean function


def test_mean_of_constant():
    p = Path.from_callable(lambda t: 2.5 - 1j)
    for sigma in (+1, -1):
        m = mean_function(p, 0.1, sigma)
        assert m.at(0.3)[0] == pytest.approx(2.5 - 1j, abs=1e-14)


def test_mean_of_identity_shifts_by_half_eps():
    m = mean_function(Path.from_callable(lambda t: t), 0.1, +1)
    ts = np.linspace(-1.0, 2.0, 7)
    assert np.allclose(m.at_many(ts)[:, 0], ts + 0.05, atol=1e-14)


def test_mean_of_square_backward():
    # (-1/0.1) * integral_1^0.9 s^2 ds = (1 - 0.729)/0.3
    m = mean_function(Path.from_callable(lambda t: t * t), 0.1, -1)
    assert m.at(1.0)[0] == pytest.approx((1.0 - 0.729) / 0.3, abs=1e-12)


def test_mean_derivative_matches_quotient():
    # d/dt of the windowed mean equals the one-sided quotient at the same scale
    p = Path.from_callable(np.sin, vectorized=True)
    eps = 0.1
    for sigma in (+1, -1):
        m = mean_function(p, eps, sigma)
        step = eps / 1000.0
        for t in (0.2, 1.3):
            numeric = (m.at(t + step)[0] - m.at(t - step)[0]) / (2.0 * step)
            assert abs(numeric - delta(p, eps, sigma, t)[0]) < 1e-6


def test_mean_requires_analytic_backing():
    g = make_grid(0.0, 1.0, 10, 0.0)
    p = Path.from_samples(g, np.zeros(11))
    with pytest.raises(ValidationError):
        mean_function(p, 0.1, +1)


def test_mean_respects_domain():
    p = Path.from_callable(lambda t: t, domain=(0.0, 1.0))
    m = mean_function(p, 0.2, +1)
    assert m.domain == (0.0, 0.8)
    with pytest.raises(DomainError):
        m.at(0.9)

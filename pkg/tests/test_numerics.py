import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bertrand_lab.numerics import ReparametrizedChart, chebyshev_nodes, find_roots, sample_interval


def test_sample_interval_finite_is_interior_and_uniform():
    xs = sample_interval(0.0, 1.0, 9)
    assert xs[0] > 0 and xs[-1] < 1
    assert np.allclose(np.diff(xs), 0.1)


@pytest.mark.parametrize("a,b", [(0.0, math.inf), (-math.inf, 3.0), (-math.inf, math.inf)])
def test_sample_interval_infinite_ends(a, b):
    xs = sample_interval(a, b, 100)
    assert np.all(np.diff(xs) > 0)
    assert np.all((xs > a) & (xs < b))


def test_sample_interval_rejects_nonpositive_count():
    with pytest.raises(ValueError):
        sample_interval(0, 1, 0)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=4, unique=True))
def test_find_roots_matches_polynomial_roots(roots):
    roots = sorted(roots)
    if any(abs(x - y) < 1e-2 for x, y in zip(roots, roots[1:])):
        return
    poly = np.poly1d(np.poly(roots))
    dpoly = poly.deriv()
    found = find_roots(lambda x: float(poly(x)), np.linspace(-6, 6, 2001), dg=lambda x: float(dpoly(x)))
    oracle = sorted(np.real(np.roots(poly.coeffs)))
    assert len(found) == len(oracle)
    assert np.allclose(found, oracle, atol=1e-8)


def test_find_roots_double_root_without_sign_change():
    found = find_roots(lambda x: (x - 0.3) ** 2 * (x + 2), np.linspace(-1, 1, 401))
    assert len(found) == 1 and abs(found[0] - 0.3) < 1e-6


def test_chebyshev_nodes_endpoints():
    x = chebyshev_nodes(2.0, 5.0, 17)
    assert x[0] == 2.0 and x[-1] == 5.0 and np.all(np.diff(x) > 0)


def test_chart_matches_closed_form_and_round_trips():
    # w(s) = 1 + s^2  =>  r(s) = s + s^3 / 3 with anchor 0
    w = lambda s: 1.0 + np.asarray(s) ** 2  # noqa: E731
    dw = lambda s: 2.0 * np.asarray(s)  # noqa: E731
    chart = ReparametrizedChart(-1.0, 2.0, w, dw, anchor=0.0, r_anchor=0.0, n=257)
    s = np.linspace(-1.0, 2.0, 101)
    exact = s + s**3 / 3
    assert np.allclose(chart.r_of(s), exact, atol=1e-12)
    assert np.max(np.abs(chart.s_of(exact) - s)) < 1e-10
    s_, s1, s2 = chart(exact[37])
    assert s1 == pytest.approx(1.0 / w(s_), rel=1e-12)
    assert s2 == pytest.approx(-dw(s_) / w(s_) ** 3, rel=1e-12)


def test_chart_rejects_nonpositive_weight():
    with pytest.raises(ValueError):
        ReparametrizedChart(-1.0, 1.0, lambda s: np.asarray(s), lambda s: np.ones_like(s))

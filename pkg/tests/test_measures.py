import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from leftcurtain.measures import (
    AtomicMeasure, NotDominatedError, PutFunction, barycentre, convex_order_leq, discretize,
    measure_from_spec, put_value, quantile, subtract, uniform_quantile,
)

from conftest import pairs


def A(*atoms):
    return AtomicMeasure.from_atoms(atoms)


def put_oracle(atoms, k):
    return sum(m * max(k - x, 0.0) for x, m in atoms)


THREE = A((-2, .25), (0, .5), (2, .25))
SYM2 = A((-2, .5), (2, .5))


@pytest.mark.parametrize("eta,k,expected", [
    (AtomicMeasure.point(0.0), 0.0, 0.0),
    (SYM2, 0.0, 1.0),
    (THREE, 2.0, 2.0),
])
def test_put_value(eta, k, expected):
    assert put_value(eta, k) == pytest.approx(expected, abs=1e-15)
    assert put_oracle(eta.atoms, k) == pytest.approx(expected, abs=1e-15)


def test_put_function_kink_table_matches_direct_sum():
    P = PutFunction.of(THREE)
    for k, v in zip(P.kinks, P.values):
        assert v == pytest.approx(put_oracle(THREE.atoms, k))
    assert P.right_slopes.tolist() == [.25, .75, 1.0]
    assert P.left_slopes.tolist() == [0.0, .25, .75]


def test_barycentre():
    assert barycentre(AtomicMeasure.point(3.5)) == 3.5
    assert barycentre(SYM2) == 0.0
    assert barycentre(A((-2, .125), (2, .375))) == pytest.approx(1.0)


def test_quantile_examples():
    assert quantile(AtomicMeasure.point(.7), .3) == .7
    assert quantile(A((-1, .5), (1, .5)), .5) == -1.0
    assert quantile(THREE, .8) == 2.0
    assert quantile(THREE, .25) == -2.0
    assert quantile(THREE, .26) == 0.0


def test_convex_order_examples():
    assert convex_order_leq(THREE, THREE)
    assert convex_order_leq(AtomicMeasure.point(0.0), A((-1, .5), (1, .5)))
    assert convex_order_leq(A((-1, .5), (1, .5)), SYM2)
    assert not convex_order_leq(SYM2, A((-1, .5), (1, .5)))


def test_convex_order_needs_equal_mean_and_mass():
    assert not convex_order_leq(AtomicMeasure.point(.1), SYM2)
    assert not convex_order_leq(AtomicMeasure.point(0.0, .5), SYM2)


def test_subtract():
    assert subtract(THREE, THREE).is_empty
    r = subtract(SYM2, A((-2, .375), (2, .125)))
    assert r.x.tolist() == [-2.0, 2.0]
    assert r.m == pytest.approx([.125, .375])
    with pytest.raises(NotDominatedError):
        subtract(AtomicMeasure.point(0.0, .5), AtomicMeasure.point(0.0, 1.0))


def test_discretize_examples():
    d = discretize(lambda u: 0.3, 7)
    assert d.x.tolist() == pytest.approx([0.3]) and d.mass == pytest.approx(1.0)
    d2 = discretize(uniform_quantile(0, 2), 2)
    assert d2.x == pytest.approx([.5, 1.5])
    d4 = discretize(uniform_quantile(0, 2), 4)
    assert d4.x == pytest.approx([.25, .75, 1.25, 1.75])
    assert d4.m == pytest.approx([.25] * 4)


def test_discretize_samples_matches_exact_bin_means():
    s = [0, 1, 2, 3, 4, 5]
    d = discretize(s, 4)
    # each bin holds 1.5 samples: one whole sample plus half of the straddling one
    assert d.x == pytest.approx([(0 + .5 * 1) / 1.5, (.5 * 1 + 2) / 1.5, (3 + .5 * 4) / 1.5, (.5 * 4 + 5) / 1.5])


def test_measure_from_spec():
    assert measure_from_spec({"atoms": [[0, 1]]}).atoms == [(0.0, 1.0)]
    assert measure_from_spec({"uniform": [0, 2], "n": 2}).x == pytest.approx([.5, 1.5])
    with pytest.raises(ValueError):
        measure_from_spec({"weird": 1})


def test_invalid_measures_rejected():
    with pytest.raises(ValueError):
        AtomicMeasure(np.array([1.0, 0.0]), np.array([.5, .5]))
    with pytest.raises(ValueError):
        A((0, .7), (1, .7))


@settings(max_examples=60, deadline=None)
@given(pairs())
def test_split_pairs_are_convex_ordered(p):
    mu, nu = p
    assert convex_order_leq(mu, nu)
    assert mu.mass == pytest.approx(nu.mass)
    assert mu.first_moment == pytest.approx(nu.first_moment, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 60), st.floats(-3, 3), st.floats(.1, 5))
def test_discretize_sits_below_source_in_convex_order(n, a, width):
    fine = discretize(uniform_quantile(a, a + width), 4 * n)
    coarse = discretize(uniform_quantile(a, a + width), n)
    assert convex_order_leq(coarse, fine)


@settings(max_examples=60, deadline=None)
@given(pairs(), st.floats(-10, 10))
def test_put_matches_oracle_and_is_convex(p, k):
    _, nu = p
    assert put_value(nu, k) == pytest.approx(put_oracle(nu.atoms, k), abs=1e-12)
    h = 0.37
    mid = put_value(nu, k)
    assert put_value(nu, k - h) + put_value(nu, k + h) >= 2 * mid - 1e-12

import itertools
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from leftcurtain import american_put as ap
from leftcurtain.american_put import PutPair
from leftcurtain.coupling import joint_law
from leftcurtain.curtain import build_left_curtain
from leftcurtain.instances import three_point, two_atom
from leftcurtain.measures import AtomicMeasure, put_value

from conftest import pairs

UNIFORM_PRICE = 5 / 16


def stopping_oracle(t, k):
    """Best value over every exercise/hold assignment of the pieces, by enumeration."""
    pieces = []
    for i in range(len(t)):
        ell = t.u[i + 1] - t.u[i]
        r, g, s = t.R[i], t.G[i], t.S[i]
        ys = [(g, 1.0)] if s == g else [(r, (s - g) / (s - r)), (s, (g - r) / (s - r))]
        pieces.append((ell, max(k.K1 - g, 0.0), sum(p * max(k.K2 - y, 0.0) for y, p in ys)))
    best = -math.inf
    for rule in itertools.product([True, False], repeat=len(pieces)):
        val = sum(ell * (a if ex else b) for (ell, a, b), ex in zip(pieces, rule))
        best = max(best, val)
    return best


def test_strikes_validated():
    with pytest.raises(ap.StrikeError):
        PutPair(1.0, 1.0)


def test_worthless_put():
    mu, nu = three_point()
    t = build_left_curtain(mu, nu)
    assert ap.model_price(t, PutPair(-2.0, -3.0))[0] == 0.0


def test_three_point_price_matches_enumeration(three):
    _, _, t = three
    k = PutPair(.5, .25)
    price, ex = ap.model_price(t, k)
    assert price == pytest.approx(stopping_oracle(t, k)) == pytest.approx(.8125)
    assert ex == [True, False]


def test_three_point_threshold_profile(three):
    mu, nu, t = three
    k = PutPair(.5, .25)
    prof = dict(ap.threshold_profile(t, k))
    law = joint_law(t)
    # A(u) by direct expectation over the joint law with the rule U <= u
    assert prof[0.0] == pytest.approx(put_value(nu, .25))
    assert prof[1.0] == pytest.approx(put_value(mu, .5))
    assert prof[.5] == pytest.approx(.5 * .5 + float(np.dot(np.maximum(.25 - law.y, 0)[law.y != 0], law.m[law.y != 0])))


def test_three_point_root_hedge(three):
    mu, nu, t = three
    k = PutPair(.5, .25)
    th = ap.find_ustar(t, k)
    assert th.tag == "root" and th.u_star == .5
    h = ap.build_hedge(t, k, th)
    xs = np.linspace(-4, 4, 2001)
    assert np.all(h.psi(xs) >= np.maximum(k.K2 - xs, 0) - 1e-12)
    assert np.all(h.phi(xs, k) + h.psi(xs) >= np.maximum(k.K1 - xs, 0) - 1e-12)
    assert ap.dual_price(mu, nu, k, h) == pytest.approx(.8125, abs=1e-12)


def test_uniform_example_instance(uniform_instance):
    mu, nu, t = uniform_instance
    k = PutPair(1.25, 1.0)
    price, _ = ap.model_price(t, k)
    assert price == pytest.approx(UNIFORM_PRICE, abs=2e-3)
    th = ap.find_ustar(t, k)
    assert th.tag == "root" and th.u_star == pytest.approx(.5, abs=1e-3)
    prof = ap.threshold_profile(t, k)
    us, vals = np.array([p[0] for p in prof]), np.array([p[1] for p in prof])
    assert np.max(np.abs(vals - (1 + us - us ** 2) / 4)) < 2e-3
    assert us[np.argmax(vals)] == pytest.approx(.5, abs=1e-3)
    h = ap.build_hedge(t, k, th)
    assert h.theta == pytest.approx(.5, abs=2e-3)
    assert (h.strike_low, h.strike_high) == pytest.approx((.5, 1.5), abs=2e-3)
    assert ap.dual_price(mu, nu, k, h) == pytest.approx(UNIFORM_PRICE, abs=2e-3)
    assert ap.bhz_price_trivial(mu, nu, k) == pytest.approx(.25, abs=2e-3)


def test_uniform_example_lambda_closed_form(uniform_instance):
    _, _, t = uniform_instance
    k = PutPair(1.25, 1.0)
    # the closed form needs S(u) = 1 + u > K1, i.e. u > 1/4; below that S <= K1
    assert ap.lambda_bar(t, k, .1) == math.inf
    for u in (.3, .45, .55, .8):
        r, g, s = 1 - u, 1.0, 1 + u
        assert ap.lam(r, g, s, k) == pytest.approx((.5 - u) / u)
        assert ap.lambda_bar(t, k, u) == pytest.approx((.5 - u) / u, abs=.02 / u ** 2)


def test_uniform_example_dual_search(uniform_instance):
    mu, nu, _ = uniform_instance
    k = PutPair(1.25, 1.0)
    h = ap.dual_search(mu, nu, k)
    assert h.cost == pytest.approx(UNIFORM_PRICE, abs=2e-3)
    assert h.theta == pytest.approx(.5, abs=2e-3)
    assert (h.strike_low, h.strike_high) == pytest.approx((.5, 1.5), abs=2e-3)


def test_lambda_bar_conventions():
    k = PutPair(1.0, .5)
    # S <= K1: exercising now beats waiting
    t = build_left_curtain(AtomicMeasure.point(0.0), AtomicMeasure.from_atoms([(-.5, .5), (.5, .5)]))
    assert ap.lambda_bar(t, k, .7) == math.inf
    # R >= K2 with G < K1 and S > K1: waiting is worth nothing extra, exercise wins
    t2 = build_left_curtain(AtomicMeasure.point(.8), AtomicMeasure.from_atoms([(.6, .5), (1.0, .5)]))
    assert ap.lambda_bar(t2, PutPair(.9, .5), .7) == math.inf
    # G >= K1: nothing to exercise, hold
    t3 = build_left_curtain(AtomicMeasure.point(2.0), AtomicMeasure.from_atoms([(1.0, .5), (3.0, .5)]))
    assert ap.lambda_bar(t3, PutPair(1.5, 1.2), .7) == -math.inf


def test_always_negative():
    mu, nu = three_point()
    t = build_left_curtain(mu, nu)
    assert ap.find_ustar(t, PutPair(-3.0, -4.0)).tag == "always-negative"


def test_jump_archetype_across_atoms(pair):
    mu, nu, t = pair
    k = PutPair(1.5, 1.0)
    th = ap.find_ustar(t, k)
    assert th.tag == "jump"
    with pytest.raises(ap.NoTwoPutHedgeError):
        ap.build_hedge(t, k, th)
    rep = ap.price(t, mu, nu, k)
    assert rep.gap >= -1e-12
    assert rep.primal == pytest.approx(stopping_oracle(t, k))
    assert rep.dual == pytest.approx(ap.dual_lp(mu, nu, k), abs=1e-9)


def test_bhz():
    mu, nu = AtomicMeasure.point(0.0), AtomicMeasure.from_atoms([(-1, .5), (1, .5)])
    assert ap.bhz_price_trivial(mu, nu, PutPair(.6, .5)) == pytest.approx(.75)
    assert ap.bhz_price_trivial(mu, nu, PutPair(0.0, -2.0)) == 0.0
    with pytest.raises(ValueError):
        ap.bhz_price_trivial(*two_atom(), PutPair(.6, .5))


def test_canonical_hedge_cost():
    mu, nu = two_atom()
    k = PutPair(1.5, 1.0)
    direct = float(np.dot(np.maximum(np.maximum(k.K1 - mu.x, 0) - np.maximum(k.K2 - mu.x, 0), 0), mu.m))
    assert ap.dual_price(mu, nu, k, ap.canonical_hedge(k)) == pytest.approx(direct + put_value(nu, k.K2))


def test_infeasible_hedge_rejected():
    mu, nu = two_atom()
    with pytest.raises(ap.NotSuperhedgeError):
        ap.dual_price(mu, nu, PutPair(1.5, 1.0), ap.HedgePortfolio(.1, -2.0, 2.0))
    with pytest.raises(ap.NotSuperhedgeError):
        ap.dual_price_psi(mu, nu, PutPair(1.5, 1.0), [1.0], [.5])


def test_report_json(three):
    mu, nu, t = three
    js = ap.price(t, mu, nu, PutPair(.5, .25)).to_json()
    assert set(js) == {"primal", "dual", "gap", "u_star", "archetype", "hedge", "bhz", "decisions"}
    assert set(js["hedge"]) == {"theta", "r", "s"}


strikes = st.tuples(st.floats(-4, 4), st.floats(.01, 3))


@settings(max_examples=60, deadline=None)
@given(pairs(max_mu=6, max_nu=20), strikes, st.floats(0, 1), st.floats(-5, 5), st.floats(0, 4))
def test_weak_duality_random_hedges(p, ks, frac, lo, width):
    mu, nu = p
    k = PutPair(ks[0], ks[0] - ks[1])
    t = build_left_curtain(mu, nu)
    primal, _ = ap.model_price(t, k)
    assert primal == pytest.approx(stopping_oracle(t, k)) if len(t) <= 12 else True
    r, s = min(lo, k.K2 - 1e-3), max(lo + width, k.K2 + 1e-3)
    theta_min = (k.K2 - r) / (s - r)
    h = ap.HedgePortfolio(theta_min + frac * (1 - theta_min), r, s)
    assert ap.dual_price(mu, nu, k, h) >= primal - 1e-8
    # adding a long put to a superhedge keeps it a superhedge
    kinks = np.array([r, s, k.K2 + width])
    w = np.array([1 - h.theta, h.theta, frac])
    assert ap.dual_price_psi(mu, nu, k, kinks, w) >= primal - 1e-8


@settings(max_examples=60, deadline=None)
@given(pairs(max_mu=6, max_nu=20), strikes)
def test_duality_report(p, ks):
    mu, nu = p
    k = PutPair(ks[0], ks[0] - ks[1])
    t = build_left_curtain(mu, nu)
    rep = ap.price(t, mu, nu, k)
    lp = ap.dual_lp(mu, nu, k)
    assert rep.gap >= -1e-8
    assert lp >= rep.primal - 1e-8 and lp <= rep.dual + 1e-8
    if rep.archetype == "root":
        assert rep.gap <= 1e-8


@settings(max_examples=40, deadline=None)
@given(pairs(max_mu=6, max_nu=20), strikes)
def test_lambda_sign_matches_decisions(p, ks):
    mu, nu = p
    k = PutPair(ks[0], ks[0] - ks[1])
    t = build_left_curtain(mu, nu)
    imm, cont = ap.piece_values(t, k)
    clear = np.abs(imm - cont) > 1e-12
    sign = ap.lambda_profile(t, k) >= 0
    assert np.array_equal(sign[clear], (imm > cont)[clear])


@settings(max_examples=60, deadline=None)
@given(pairs(max_mu=6, max_nu=20), strikes)
def test_monotone_rule_attains_model_price(p, ks):
    mu, nu = p
    k = PutPair(ks[0], ks[0] - ks[1])
    t = build_left_curtain(mu, nu)
    price, ex = ap.model_price(t, k)
    if ex == sorted(ex, reverse=True):
        best = max(v for _, v in ap.threshold_profile(t, k))
        assert best == pytest.approx(price, abs=1e-12)
    else:
        assert max(v for _, v in ap.threshold_profile(t, k)) <= price + 1e-12


@settings(max_examples=60, deadline=None)
@given(pairs(max_mu=1), strikes)
def test_bhz_below_model_price(p, ks):
    mu, nu = p
    k = PutPair(ks[0], ks[0] - ks[1])
    t = build_left_curtain(mu, nu)
    assert ap.bhz_price_trivial(mu, nu, k) <= ap.model_price(t, k)[0] + 1e-12

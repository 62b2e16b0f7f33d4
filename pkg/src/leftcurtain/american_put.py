"""Two-date American put under the left-curtain model and its static superhedge.

The primal is the value of optimal stopping in the model built from a
triple: at time 1 the holder knows U, so each piece is exercised or held
independently.  The dual is the cost of a convex claim psi dominating the
time-2 put, plus the time-1 shortfall phi = ((K1 - x)^+ - psi)^+.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from .coupling import UncertifiedTripleError
from .curtain import CouplingTriple
from .measures import AtomicMeasure, put_value

DUAL_TOL = 1e-8
CHUNK = 2_000_000


class StrikeError(ValueError):
    pass


class NoTwoPutHedgeError(ValueError):
    pass


class NotSuperhedgeError(ValueError):
    pass


@dataclass(frozen=True)
class PutPair:
    K1: float
    K2: float

    def __post_init__(self):
        if not self.K2 < self.K1:
            raise StrikeError("strikes violate K2<K1")


@dataclass(frozen=True)
class HedgePortfolio:
    """psi(x) = theta (S* - x)^+ + (1 - theta) (R* - x)^+."""

    theta: float
    strike_low: float
    strike_high: float
    cost: float = math.nan

    def psi(self, x):
        x = np.asarray(x, dtype=float)
        return (self.theta * np.maximum(self.strike_high - x, 0.0)
                + (1.0 - self.theta) * np.maximum(self.strike_low - x, 0.0))

    def phi(self, x, k: PutPair):
        x = np.asarray(x, dtype=float)
        return np.maximum(np.maximum(k.K1 - x, 0.0) - self.psi(x), 0.0)

    def kinks(self) -> list[float]:
        return sorted({self.strike_low, self.strike_high})

    def to_json(self) -> dict:
        return {"theta": self.theta, "r": self.strike_low, "s": self.strike_high, "cost": self.cost}


@dataclass
class PriceReport:
    primal: float
    dual: float
    u_star: Optional[float]
    archetype: str
    exercise: list[bool]
    hedge: Optional[HedgePortfolio] = None
    bhz: Optional[float] = None
    notes: list[str] = field(default_factory=list)

    @property
    def gap(self) -> float:
        return self.dual - self.primal

    def to_json(self) -> dict:
        return {
            "primal": self.primal,
            "dual": self.dual,
            "gap": self.gap,
            "u_star": self.u_star,
            "archetype": self.archetype,
            "hedge": None if self.hedge is None else
            {"theta": self.hedge.theta, "r": self.hedge.strike_low, "s": self.hedge.strike_high},
            "bhz": self.bhz,
            "decisions": list(self.exercise),
        }


def _require(t: CouplingTriple) -> None:
    if not t.certified:
        raise UncertifiedTripleError("triple failed certification: " + "; ".join(t.diagnostics))


def piece_values(t: CouplingTriple, k: PutPair) -> tuple[np.ndarray, np.ndarray]:
    """Immediate and continuation payoff on each piece."""
    R, G, S = t.R, t.G, t.S
    imm = np.maximum(k.K1 - G, 0.0)
    live = S > G
    span = np.where(live, S - R, 1.0)
    cont = np.where(
        live,
        (np.maximum(k.K2 - R, 0.0) * (S - G) + np.maximum(k.K2 - S, 0.0) * (G - R)) / span,
        np.maximum(k.K2 - G, 0.0),
    )
    return imm, cont


def model_price(t: CouplingTriple, k: PutPair) -> tuple[float, list[bool]]:
    """Optimal stopping value of the model; ties are exercised at time 1."""
    _require(t)
    imm, cont = piece_values(t, k)
    ex = imm >= cont
    return float(np.dot(t.lengths, np.where(ex, imm, cont))), ex.tolist()


def threshold_profile(t: CouplingTriple, k: PutPair) -> list[tuple[float, float]]:
    """A(u) for the rule "exercise iff U <= u", at every piece breakpoint."""
    _require(t)
    imm, cont = piece_values(t, k)
    ell = t.lengths
    head = np.concatenate(([0.0], np.cumsum(ell * imm)))
    tail = np.concatenate((np.cumsum((ell * cont)[::-1])[::-1], [0.0]))
    return list(zip(t.u.tolist(), (head + tail).tolist()))


def lam(r: float, g: float, s: float, k: PutPair) -> float:
    return (k.K1 - g) / (s - g) - ((k.K2 - r) - (k.K1 - g)) / (g - r)


def in_domain(r: float, g: float, s: float, k: PutPair) -> bool:
    return r < min(k.K2, g) and s > k.K1 and g < k.K1 and s > g


def lambda_bar(t: CouplingTriple, k: PutPair, u: float) -> float:
    """Exercise indicator in slope form, evaluated at (R(u), G(u), S(u)).

    Inside its natural domain the sign agrees with immediate minus
    continuation value.  Outside it returns +inf when exercise is strictly
    better and -inf otherwise, so the sign keeps that meaning everywhere.
    """
    r, g, s = t.at(u)
    return _lambda_piece(r, g, s, k)


def _lambda_piece(r: float, g: float, s: float, k: PutPair) -> float:
    if in_domain(r, g, s, k):
        return lam(r, g, s, k)
    imm = max(k.K1 - g, 0.0)
    if s > g:
        cont = (max(k.K2 - r, 0.0) * (s - g) + max(k.K2 - s, 0.0) * (g - r)) / (s - r)
    else:
        cont = max(k.K2 - g, 0.0)
    # ties are exercised as in model_price, unless there is nothing to exercise
    return math.inf if imm > cont or imm == cont > 0 else -math.inf


def lambda_profile(t: CouplingTriple, k: PutPair) -> np.ndarray:
    return np.array([_lambda_piece(float(r), float(g), float(s), k) for r, g, s in zip(t.R, t.G, t.S)])


@dataclass(frozen=True)
class Threshold:
    """Outcome of the sign scan of the lambda profile.

    ``index`` is the first held piece and ``u_star`` its left end, so pieces
    with u <= u_star are exercised.  For a root, ``touch`` holds the
    collinear (theta, R*, S*).
    """

    tag: str
    u_star: Optional[float]
    index: Optional[int]
    flips: int
    touch: Optional[tuple[float, float, float]] = None


def _r_of_s(s: float, g: float, k: PutPair) -> float:
    theta = (k.K1 - g) / (s - g)
    if theta >= 1.0:  # S* at K1: the touching R* runs off to -inf
        return -math.inf
    return (k.K2 - theta * s) / (1.0 - theta)


def _s_of_r(r: float, g: float, k: PutPair) -> tuple[float, float]:
    theta = 1.0 - (k.K1 - k.K2) / (g - r)
    return theta, g + (k.K1 - g) / theta


def collinear_insertion(t: CouplingTriple, k: PutPair, e: int, c: int,
                        tol: float = 1e-12) -> Optional[tuple[float, float, float]]:
    """A collinear (R*, G*, S*) that fits between pieces e and c.

    Collinear means psi through (R*, K2 - R*), (G*, K1 - G*) and (S*, 0) is
    a line.  Fitting means the triple stays left-monotone with the extra
    piece inserted at u*: S_e <= S* <= S_c, R_c <= R* <= R_e, R* outside
    every earlier (R_i, S_i) and every later R_j outside (R*, S*).  Returns
    (theta, R*, S*) or None when the sign change jumps over zero.
    """
    g = float(t.G[c])
    if g >= k.K1:
        return None
    s_e, s_c = float(t.S[e]), float(t.S[c])
    if s_c <= k.K1:
        return None
    r_hi = min(float(t.R[e]), k.K2, g - (k.K1 - k.K2)) if s_e > g else min(k.K2, g - (k.K1 - k.K2))
    r_hi = min(r_hi, _r_of_s(s_c, g, k))
    r_lo = float(t.R[c])
    if s_e > k.K1:
        r_lo = max(r_lo, _r_of_s(s_e, g, k))
    if r_lo > r_hi + tol:
        return None
    before = slice(0, e + 1)
    after = slice(c, None)
    Rb, Sb = t.R[before], t.S[before]
    Ra = t.R[after]
    cand = [r_hi, r_lo]
    for v in np.concatenate((Rb, Sb, Ra)):
        if r_lo - tol <= v <= r_hi + tol:
            cand.append(float(v))
    for v in Ra:
        if v > k.K1:
            r = _r_of_s(float(v), g, k)
            if r_lo - tol <= r <= r_hi + tol:
                cand.append(r)
    for r in sorted(set(cand), reverse=True):
        r = min(max(r, r_lo), r_hi)
        if not g - r > k.K1 - k.K2:
            continue
        theta, s = _s_of_r(r, g, k)
        if not (0.0 < theta < 1.0 and s > k.K1):
            continue
        if np.any((Rb < r - tol) & (r < Sb - tol)):
            continue
        if np.any((Ra > r + tol) & (Ra < s - tol)):
            continue
        return float(theta), float(r), float(s)
    return None


def find_ustar(t: CouplingTriple, k: PutPair) -> Threshold:
    """Classify the exercise region.

    root: a single switch from exercise to hold, inside the u-range of one
    source atom, at which a collinear triple can be inserted.  jump: any
    other switch (across atoms, blocked by earlier pieces, or repeated).
    """
    _require(t)
    ex = lambda_profile(t, k) >= 0
    if ex.all():
        return Threshold("always-positive", 1.0, None, 0)
    if not ex.any():
        return Threshold("always-negative", 0.0, None, 0)
    changes = np.flatnonzero(ex[:-1] != ex[1:])
    first = int(changes[0]) + 1
    u_star = float(t.u[first])
    if len(changes) > 1 or not ex[0] or t.G[first - 1] != t.G[first]:
        return Threshold("jump", u_star, first, len(changes))
    touch = collinear_insertion(t, k, first - 1, first)
    if touch is None:
        return Threshold("jump", u_star, first, 1)
    return Threshold("root", u_star, first, 1, touch)


def build_hedge(t: CouplingTriple, k: PutPair, th: Threshold) -> HedgePortfolio:
    """psi* touching (K2 - x) at R* and (K1 - x) at G*, priced on the triple's marginals."""
    if th.tag != "root" or th.touch is None:
        raise NoTwoPutHedgeError("no two-put hedge; use dual_search")
    theta, r, s = th.touch
    xs, xm, ys, ym = _triple_marginals(t)
    cost = _family_cost(np.array([theta]), np.array([r]), np.array([s]), xs, xm, ys, ym, k)
    return HedgePortfolio(theta, r, s, float(cost[0]))


def _triple_marginals(t: CouplingTriple):
    ell = t.lengths
    live = t.S > t.G
    span = np.where(live, t.S - t.R, 1.0)
    pr = np.where(live, (t.S - t.G) / span, 1.0)
    ys = np.concatenate((np.where(live, t.R, t.G), t.S[live]))
    ym = np.concatenate((ell * pr, (ell * (1.0 - pr))[live]))
    return t.G, ell, ys, ym


def _family_cost(theta, r, s, xs, xm, ys, ym, k: PutPair) -> np.ndarray:
    out = np.empty(theta.size)
    step = max(1, CHUNK // max(1, xs.size + ys.size))
    for i0 in range(0, theta.size, step):
        sl = slice(i0, i0 + step)
        th, rr, ss = theta[sl, None], r[sl, None], s[sl, None]

        def psi(x):
            return th * np.maximum(ss - x, 0.0) + (1.0 - th) * np.maximum(rr - x, 0.0)

        phi = np.maximum(np.maximum(k.K1 - xs, 0.0) - psi(xs), 0.0)
        out[sl] = phi @ xm + psi(ys) @ ym
    return out


def _check_superhedge(h: HedgePortfolio, k: PutPair, extra: np.ndarray, tol: float) -> None:
    if not 0.0 <= h.theta <= 1.0 + tol:
        raise NotSuperhedgeError("not a superhedge: theta outside [0, 1]")
    pts = np.concatenate((h.kinks(), [k.K2], extra))
    if np.any(h.psi(pts) < np.maximum(k.K2 - pts, 0.0) - tol):
        raise NotSuperhedgeError("not a superhedge")


def dual_price(mu: AtomicMeasure, nu: AtomicMeasure, k: PutPair, h: HedgePortfolio,
               tol: float = 1e-10) -> float:
    """Exact cost of (phi, psi) against the two marginals."""
    _check_superhedge(h, k, np.concatenate((mu.x, nu.x)), tol)
    phi = float(np.dot(h.phi(mu.x, k), mu.m))
    return phi + float(np.dot(h.psi(nu.x), nu.m))


def dual_price_psi(mu: AtomicMeasure, nu: AtomicMeasure, k: PutPair, kinks, weights,
                   tol: float = 1e-10) -> float:
    """Dual cost for psi(x) = sum_i w_i (k_i - x)^+ with w_i >= 0."""
    kinks = np.asarray(kinks, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0):
        raise NotSuperhedgeError("not a superhedge: negative put weight")

    def psi(x):
        return np.maximum(kinks - np.asarray(x, dtype=float)[..., None], 0.0) @ weights

    pts = np.concatenate((kinks, [k.K2], mu.x, nu.x))
    if np.any(psi(pts) < np.maximum(k.K2 - pts, 0.0) - tol) or weights.sum() < 1 - tol:
        raise NotSuperhedgeError("not a superhedge")
    phi = np.maximum(np.maximum(k.K1 - mu.x, 0.0) - psi(mu.x), 0.0)
    return float(np.dot(phi, mu.m) + np.dot(psi(nu.x), nu.m))


def canonical_hedge(k: PutPair) -> HedgePortfolio:
    return HedgePortfolio(1.0, k.K2, k.K2)


def dual_search(mu: AtomicMeasure, nu: AtomicMeasure, k: PutPair) -> HedgePortfolio:
    """Cheapest member of the two-put family with strikes on atom positions.

    R* and S* range over the atoms of both marginals and K2.  For fixed
    (R*, S*) the cost is convex piecewise linear in theta with breakpoints
    where psi touches K1 - x at a source atom, so it is enough to try the
    least feasible theta, theta = 1 and those touching values.
    """
    pts = np.union1d(np.union1d(mu.x, nu.x), [k.K2])
    best = canonical_hedge(k)
    best = HedgePortfolio(best.theta, best.strike_low, best.strike_high, dual_price(mu, nu, k, best))
    lows = pts[pts <= k.K2]
    highs = pts[pts >= k.K2]
    if lows.size == 0 or highs.size == 0:
        return best
    pr, ps = nu.put(lows), nu.put(highs)
    # rows: R*, cols: S*
    R = lows[:, None]
    S = highs[None, :]
    valid = S > R
    with np.errstate(divide="ignore", invalid="ignore"):
        theta_min = np.where(valid, np.maximum((k.K2 - R) / (S - R), 0.0), np.inf)
    ok = valid & (theta_min <= 1.0)
    cands = [theta_min, np.ones_like(theta_min)]
    for g in mu.x[mu.x < k.K1]:
        # psi(g) = K1 - g; psi(g) = theta (S - g) + (1 - theta)(R - g) when g <= R
        with np.errstate(divide="ignore", invalid="ignore"):
            th = np.where(R < g, (k.K1 - g) / (S - g), (k.K1 - R) / (S - R))
        cands.append(np.where((th >= theta_min) & (th <= 1.0) & (g < S), th, theta_min))
    kx, km = mu.x, mu.m
    imm = np.maximum(k.K1 - kx, 0.0)
    per_row = max(1, CHUNK // max(1, highs.size * max(1, kx.size)))
    for th_all in cands:
        for i0 in range(0, lows.size, per_row):
            sl = slice(i0, i0 + per_row)
            th = np.where(ok[sl], th_all[sl], 0.0)
            r = R[sl]
            cost = th * ps[None, :] + (1.0 - th) * pr[sl, None]
            xx = kx[None, None, :]
            psi = (th[..., None] * np.maximum(S[..., None] - xx, 0.0)
                   + (1.0 - th[..., None]) * np.maximum(r[..., None] - xx, 0.0))
            cost = cost + np.maximum(imm - psi, 0.0) @ km
            cost = np.where(ok[sl], cost, np.inf)
            j = np.unravel_index(int(np.argmin(cost)), cost.shape)
            c = float(cost[j])
            if c < best.cost - 1e-15:
                best = HedgePortfolio(float(th[j]), float(lows[i0 + j[0]]), float(highs[j[1]]), c)
    return best


def dual_lp(mu: AtomicMeasure, nu: AtomicMeasure, k: PutPair) -> float:
    """inf of the dual cost over every convex psi >= (K2 - x)^+.

    Diagnostic only.  The cost sees psi at atom positions, so psi may be
    taken piecewise linear with nodes at the atoms and K2; the problem is
    then a linear program in the node values and the phi shortfalls.
    """
    z = np.union1d(np.union1d(mu.x, nu.x), [k.K2])
    n, m = z.size, mu.x.size
    # variables: psi at nodes (n), phi at source atoms (m)
    c = np.concatenate((np.zeros(n), mu.m))
    iy = np.searchsorted(z, nu.x)
    np.add.at(c, iy, nu.m)
    rows, rhs = [], []
    dz = np.diff(z)
    for i in range(n - 2):  # chord slopes nondecreasing
        row = np.zeros(n + m)
        row[i] += 1.0 / dz[i]
        row[i + 1] -= 1.0 / dz[i] + 1.0 / dz[i + 1]
        row[i + 2] += 1.0 / dz[i + 1]
        rows.append(-row)
        rhs.append(0.0)
    ix = np.searchsorted(z, mu.x)
    for j in range(m):  # phi_j + psi(x_j) >= K1 - x_j
        row = np.zeros(n + m)
        row[ix[j]] = -1.0
        row[n + j] = -1.0
        rows.append(row)
        rhs.append(-(k.K1 - mu.x[j]))
    bounds = [(max(k.K2 - v, 0.0), None) for v in z] + [(0.0, None)] * m
    res = linprog(c, A_ub=np.array(rows) if rows else None, b_ub=np.array(rhs) if rhs else None,
                  bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"dual LP failed: {res.message}")
    return float(res.fun)


def bhz_price_trivial(mu: AtomicMeasure, nu: AtomicMeasure, k: PutPair) -> float:
    """max of always-exercise and never-exercise values when mu is a point mass."""
    if len(mu) != 1:
        raise ValueError("BHZ implemented for point-mass μ only")
    w = float(mu.x[0])
    return max(max(k.K1 - w, 0.0), put_value(nu, k.K2))


def price(t: CouplingTriple, mu: AtomicMeasure, nu: AtomicMeasure, k: PutPair,
          search: bool = True) -> PriceReport:
    """Primal, dual and hedge in one report.

    The dual is the cheaper of the constructive hedge (root archetype only)
    and the family search.
    """
    primal, ex = model_price(t, k)
    th = find_ustar(t, k)
    notes = []
    hedges = []
    if th.tag == "root":
        try:
            h = build_hedge(t, k, th)
            hedges.append(HedgePortfolio(h.theta, h.strike_low, h.strike_high, dual_price(mu, nu, k, h)))
        except (NoTwoPutHedgeError, NotSuperhedgeError) as exc:
            notes.append(str(exc))
    if search or not hedges:
        hedges.append(dual_search(mu, nu, k))
    best = min(hedges, key=lambda h: h.cost)
    bhz = bhz_price_trivial(mu, nu, k) if len(mu) == 1 else None
    return PriceReport(primal, best.cost, th.u_star, th.tag, ex, best, bhz, notes)

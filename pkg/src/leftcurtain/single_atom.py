"""Embedding one point mass into an atomic target along the left curtain.

For a source atom at ``w`` and a target with put function P, every height
p in [0, P(w)] defines two tangents from (w, p) to P.  Their touching points
alpha(p) > w > beta(p) and slopes a(p), b(p) give Upsilon = a - b, and the
upper/lower maps are S = alpha o Upsilon^-1, R = beta o Upsilon^-1.  For an
atomic target all of these are piecewise constant (alpha, beta) or piecewise
linear (a, b, Upsilon) in p, so the construction is exact.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .measures import MASS_TOL, MERGE_TOL, AtomicMeasure, PutFunction, subtract

TIE_TOL = 1e-12
# Negative boundary masses larger than this are a hard failure.
CLIP_TOL = 1e-10


class TargetExhaustedError(ValueError):
    pass


class AtomTooHeavyError(ValueError):
    pass


class DegenerateBoundaryError(ValueError):
    pass


def _at_top(P: PutFunction, w: float, p: float) -> bool:
    return p >= float(P(w)) - TIE_TOL * (1.0 + abs(p))


def tangent_right(P: PutFunction, w: float, p: float) -> tuple[float, float]:
    """(alpha, a): touching point and slope of the right tangent from (w, p).

    Ties go to the smallest kink (right-continuity of alpha in p).  At the top
    p = P(w) an atom of the target at w is its own touching point.
    """
    above = P.kinks > w + MERGE_TOL
    has_atom = P.measure.mass_at(w) > 0
    if _at_top(P, w, p):
        slope = P.right_slope_at(w)
        if has_atom:
            return float(w), slope
        if not above.any():
            raise TargetExhaustedError("target exhausted above")
        return float(P.kinks[above][0]), slope
    if not above.any():
        raise TargetExhaustedError("target exhausted above")
    ks = P.kinks[above]
    ratios = (P.values[above] - p) / (ks - w)
    best = ratios.min()
    i = int(np.flatnonzero(ratios <= best + TIE_TOL * (1.0 + abs(best)))[0])
    return float(ks[i]), float(ratios[i])


def tangent_left(P: PutFunction, w: float, p: float) -> tuple[float, float]:
    """(beta, b): mirror image of :func:`tangent_right`; ties go to the largest kink."""
    below = P.kinks < w - MERGE_TOL
    has_atom = P.measure.mass_at(w) > 0
    if _at_top(P, w, p) and has_atom:
        return float(w), P.left_slope_at(w)
    if not below.any():
        raise TargetExhaustedError("target exhausted below")
    ks = P.kinks[below]
    ratios = (p - P.values[below]) / (w - ks)
    best = ratios.max()
    i = int(np.flatnonzero(ratios >= best - TIE_TOL * (1.0 + abs(best)))[-1])
    return float(ks[i]), float(ratios[i])


@dataclass(frozen=True)
class UpsilonTable:
    """Piecewise description of p -> (alpha, beta, a, b, Upsilon) on [0, P(w)].

    ``p`` holds the breakpoints in increasing order.  ``alpha[k]``/``beta[k]``
    are the (constant) touching points on [p[k], p[k+1]); ``a``, ``b`` and
    ``upsilon`` are the values at the breakpoints, linear in between.
    """

    w: float
    p: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    a: np.ndarray
    b: np.ndarray
    upsilon: np.ndarray
    atom_at_w: float

    @property
    def p_top(self) -> float:
        return float(self.p[-1])

    def _interp(self, vals: np.ndarray, p: float) -> float:
        return float(np.interp(p, self.p, vals))

    def a_of(self, p: float) -> float:
        return self._interp(self.a, p)

    def b_of(self, p: float) -> float:
        return self._interp(self.b, p)

    def upsilon_of(self, p: float) -> float:
        return self._interp(self.upsilon, p)

    def segment_index(self, p: float) -> int:
        k = int(np.searchsorted(self.p, p, side="right")) - 1
        return min(max(k, 0), self.alpha.size - 1)

    def upsilon_inv(self, q: float) -> float:
        """Inverse of Upsilon, equal to P(w) on q <= Upsilon(P(w))."""
        if q <= self.upsilon[-1]:
            return self.p_top
        if q >= self.upsilon[0]:
            return 0.0
        # upsilon is decreasing in p; interpolate on the reversed arrays
        return float(np.interp(q, self.upsilon[::-1], self.p[::-1]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["p", "alpha", "beta", "a", "b", "upsilon"])
        for k in range(self.p.size):
            j = min(k, self.alpha.size - 1)
            wr.writerow([f"{v:.17g}" for v in (self.p[k], self.alpha[j], self.beta[j], self.a[k], self.b[k], self.upsilon[k])])
        return buf.getvalue()


def build_upsilon(target: AtomicMeasure, w: float) -> UpsilonTable:
    """Tabulate alpha, beta, a, b and Upsilon for a source atom at ``w``.

    Requires target mass on both sides of ``w`` (otherwise P(w) = 0 or the
    right tangent does not exist and there is nothing to tabulate).
    """
    if target.is_empty or target.mass <= 0:
        raise ValueError("target has zero mass")
    P = PutFunction.of(target)
    top = float(P(w))
    above = P.kinks > w + MERGE_TOL
    below = P.kinks < w - MERGE_TOL
    if not above.any():
        raise TargetExhaustedError("target exhausted above")
    if not below.any() or top <= 0:
        raise TargetExhaustedError("target exhausted below")

    # alpha jumps where (w, p) lies on the line of a linear piece right of w;
    # beta likewise for pieces left of w.
    right_int = P.values[above] + P.right_slopes[above] * (w - P.kinks[above])
    left_int = P.values[below] + P.left_slopes[below] * (w - P.kinks[below])
    cuts = np.concatenate((right_int, left_int))
    eps = TIE_TOL * (1.0 + top)
    cuts = cuts[(cuts > eps) & (cuts < top - eps)]
    p = np.unique(np.concatenate(([0.0], cuts, [top])))
    # near-coincident cuts would produce empty p-intervals
    keep = np.concatenate(([True], np.diff(p) > eps))
    keep[-1] = True
    p = p[keep]
    if p.size >= 2 and p[-1] - p[-2] <= eps:
        p = np.delete(p, -2)

    mids = 0.5 * (p[:-1] + p[1:])
    alpha = np.empty(mids.size)
    beta = np.empty(mids.size)
    for k, q in enumerate(mids):
        alpha[k], _ = tangent_right(P, w, q)
        beta[k], _ = tangent_left(P, w, q)

    # a and b are linear on each interval: use the interval's touching points,
    # and the left neighbour's for the top endpoint.
    seg = np.minimum(np.arange(p.size), mids.size - 1)
    al, be = alpha[seg], beta[seg]
    a = (P(al) - p) / (al - w)
    b = (p - P(be)) / (w - be)
    ups = a - b
    m_w = target.mass_at(w)
    # exact boundary value at the top: Upsilon(P(w)) = target({w})
    ups[-1] = m_w
    return UpsilonTable(float(w), p, alpha, beta, a, b, ups, m_w)


@dataclass(frozen=True)
class EmbeddingResult:
    """Outcome of embedding ``lam * delta_w`` into a target.

    ``segments`` rows are (u_lo, u_hi, R, S) in global u-coordinates, each
    covering the half-open interval (u_lo, u_hi].
    """

    w: float
    lam: float
    segments: np.ndarray
    embedded: AtomicMeasure
    residual: AtomicMeasure
    lower_mass: float
    upper_mass: float
    table: UpsilonTable | None = None

    @property
    def r_end(self) -> float:
        return float(self.segments[-1, 2])

    @property
    def s_end(self) -> float:
        return float(self.segments[-1, 3])


def _boundary_masses(target: AtomicMeasure, w: float, lam: float, r: float, s: float) -> tuple[float, float, AtomicMeasure]:
    inner = target.restrict_open(r, s)
    mass_left = lam - inner.mass
    moment_left = lam * w - inner.first_moment
    if s - r <= MERGE_TOL:
        raise DegenerateBoundaryError("degenerate boundary")
    upper = (moment_left - r * mass_left) / (s - r)
    lower = mass_left - upper
    cap_lo, cap_hi = target.mass_at(r), target.mass_at(s)
    if lower < -CLIP_TOL or upper < -CLIP_TOL or lower > cap_lo + CLIP_TOL or upper > cap_hi + CLIP_TOL:
        raise DegenerateBoundaryError(
            f"boundary masses ({lower!r}, {upper!r}) outside [0, ({cap_lo!r}, {cap_hi!r})]"
        )
    lower = min(max(lower, 0.0), cap_lo)
    upper = min(max(upper, 0.0), cap_hi)
    atoms = inner.atoms + [(r, lower), (s, upper)]
    return lower, upper, AtomicMeasure.from_atoms(atoms)


def embed_point_mass(target: AtomicMeasure, w: float, lam: float, u_offset: float = 0.0,
                     tol: float = 1e-9) -> EmbeddingResult:
    """Embed ``lam * delta_w`` into ``target`` using local u in (0, lam].

    The lowest part of u (up to the target's atom at w) stays put with
    R = G = S = w; the rest follows alpha and beta along the used range
    [Upsilon^-1(lam), P(w)] of heights.  The embedded sub-measure equals the
    target strictly between the final R and S, plus boundary masses fixed by
    the mass and mean balance.
    """
    if lam <= 0:
        raise ValueError("atom weight must be positive")
    m_w = target.mass_at(w)
    rows: list[tuple[float, float, float, float]] = []

    if lam <= m_w + MASS_TOL:
        rows.append((0.0, lam, w, w))
        embedded = AtomicMeasure.point(w, lam)
        residual = subtract(target, embedded)
        segs = np.array(rows) + np.array([u_offset, u_offset, 0.0, 0.0])
        return EmbeddingResult(float(w), lam, segs, embedded, residual, 0.0, lam, None)

    try:
        table = build_upsilon(target, w)
    except TargetExhaustedError as exc:
        raise AtomTooHeavyError(f"atom too heavy: {exc}") from None
    cap = float(table.upsilon[0])
    if lam > cap + tol:
        raise AtomTooHeavyError(f"atom too heavy: weight {lam!r} exceeds Upsilon(0) = {cap!r}")

    if m_w > 0:
        rows.append((0.0, m_w, w, w))
    p_lam = table.upsilon_inv(min(lam, cap))
    # walk the p-intervals from the top (small u) down to p_lam (u = lam)
    for k in range(table.alpha.size - 1, -1, -1):
        p_lo, p_hi = table.p[k], table.p[k + 1]
        if p_hi <= p_lam:
            break
        u_lo = float(table.upsilon[k + 1])
        if p_lo <= p_lam:
            u_hi = lam
        else:
            u_hi = float(table.upsilon[k])
        u_lo = min(u_lo, lam)
        u_hi = min(u_hi, lam)
        if u_hi <= u_lo:
            continue
        r, s = float(table.beta[k]), float(table.alpha[k])
        if rows and rows[-1][2] == r and rows[-1][3] == s:
            rows[-1] = (rows[-1][0], u_hi, r, s)
        else:
            rows.append((u_lo, u_hi, r, s))
        if p_lo <= p_lam:
            break
    # stitch rounding gaps so the local pieces tile (0, lam] exactly
    for i in range(1, len(rows)):
        rows[i] = (rows[i - 1][1],) + rows[i][1:]
    rows[-1] = rows[-1][:1] + (lam,) + rows[-1][2:]

    r_end, s_end = rows[-1][2], rows[-1][3]
    lower, upper, embedded = _boundary_masses(target, w, lam, r_end, s_end)
    residual = subtract(target, embedded)
    segs = np.array(rows) + np.array([u_offset, u_offset, 0.0, 0.0])
    return EmbeddingResult(float(w), lam, segs, embedded, residual, lower, upper, table)


def pushforward(segments: np.ndarray, w: float) -> AtomicMeasure:
    """Law of Y over the given segments when X = w (exact piece arithmetic)."""
    atoms = []
    for u_lo, u_hi, r, s in segments:
        ell = u_hi - u_lo
        if s == r:
            atoms.append((w, ell))
        else:
            atoms.append((r, ell * (s - w) / (s - r)))
            atoms.append((s, ell * (w - r) / (s - r)))
    return AtomicMeasure.from_atoms(atoms)

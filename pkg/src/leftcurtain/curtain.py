"""Left-curtain coupling of a finitely atomic source, one atom at a time.

Atoms of the source are embedded lowest first, each into whatever is left
of the target after the previous ones.  The concatenated pieces form the
triple (R, G, S) on (0, 1].
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .measures import AtomicMeasure, convex_order_leq, subtract
from .single_atom import EmbeddingResult, embed_point_mass, pushforward

MARGINAL_TOL = 1e-9
MARTINGALE_TOL = 1e-10
RESIDUAL_TOL = 1e-10


class ConvexOrderError(ValueError):
    pass


class EmbeddingError(ValueError):
    def __init__(self, index: int, cause: Exception):
        super().__init__(f"atom {index}: {cause}")
        self.index = index
        self.cause = cause


@dataclass
class CouplingTriple:
    """Piecewise-constant (R, G, S) on (0, 1].

    Piece i covers (u[i], u[i+1]] and carries R[i] <= G[i] <= S[i].
    ``residuals[k]`` is what remains of the target after the k-th source
    atom; ``stages`` keeps each atom's embedding for audit.
    """

    u: np.ndarray
    R: np.ndarray
    G: np.ndarray
    S: np.ndarray
    residuals: list[AtomicMeasure] = field(default_factory=list)
    stages: list[EmbeddingResult] = field(default_factory=list, repr=False)
    residual_order_ok: list[bool] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return not self.diagnostics

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.u)

    def __len__(self) -> int:
        return self.R.size

    def piece(self, u: float) -> int:
        if not 0.0 < u <= 1.0:
            raise ValueError(f"u must lie in (0,1], got {u!r}")
        i = int(np.searchsorted(self.u, u, side="left")) - 1
        return min(max(i, 0), self.R.size - 1)

    def at(self, u: float) -> tuple[float, float, float]:
        i = self.piece(u)
        return float(self.R[i]), float(self.G[i]), float(self.S[i])

    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.u[:-1] + self.u[1:])

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["u_lo", "u_hi", "R", "G", "S"])
        for i in range(self.R.size):
            wr.writerow([f"{v:.17g}" for v in (self.u[i], self.u[i + 1], self.R[i], self.G[i], self.S[i])])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "pieces": [[float(self.u[i]), float(self.u[i + 1]), float(self.R[i]), float(self.G[i]), float(self.S[i])]
                       for i in range(self.R.size)],
            "residuals": [r.to_json()["atoms"] for r in self.residuals],
            "residual_convex_order": list(self.residual_order_ok),
            "diagnostics": list(self.diagnostics),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)

    @classmethod
    def from_json(cls, data: dict) -> "CouplingTriple":
        pieces = np.asarray(data["pieces"], dtype=float).reshape(-1, 5)
        u = np.concatenate((pieces[:1, 0], pieces[:, 1]))
        residuals = [AtomicMeasure.from_atoms(r) for r in data.get("residuals", [])]
        return cls(u, pieces[:, 2].copy(), pieces[:, 3].copy(), pieces[:, 4].copy(), residuals,
                   residual_order_ok=list(data.get("residual_convex_order", [])))


def build_left_curtain(mu: AtomicMeasure, nu: AtomicMeasure, check: bool = True) -> CouplingTriple:
    """Construct the triple for probability measures mu <=cx nu (mu finitely atomic)."""
    if not convex_order_leq(mu, nu):
        raise ConvexOrderError("marginals not in convex order")
    residual = nu
    offset = 0.0
    cum = np.cumsum(mu.m)
    cum = cum / cum[-1]
    segments, g_vals = [], []
    residuals, stages, order_ok = [], [], []
    for i, (x, lam) in enumerate(mu.atoms):
        try:
            res = embed_point_mass(residual, x, lam, u_offset=offset)
        except ValueError as exc:
            raise EmbeddingError(i, exc) from exc
        segs = res.segments.copy()
        # pin the atom's u-range to the quantile breakpoints of mu
        segs[0, 0] = offset
        segs[-1, 1] = cum[i]
        segs = _drop_slivers(segs)
        segments.append(segs)
        g_vals.append(np.full(len(segs), x))
        residual = res.residual
        residuals.append(residual)
        stages.append(res)
        remaining = AtomicMeasure(mu.x[i + 1:], mu.m[i + 1:])
        order_ok.append(convex_order_leq(remaining, residual))
        offset = float(cum[i])
    segs = np.vstack(segments)
    u = np.concatenate((segs[:1, 0], segs[:, 1]))
    t = CouplingTriple(u, segs[:, 2].copy(), np.concatenate(g_vals), segs[:, 3].copy(),
                       residuals, stages, order_ok)
    if check:
        t.diagnostics = certify(t, mu, nu)
    return t


def _drop_slivers(segs: np.ndarray, min_len: float = 1e-14) -> np.ndarray:
    # rounding can leave pieces of length ~1e-17; fold them into a neighbour
    keep = (segs[:, 1] - segs[:, 0]) > min_len
    if keep.all() or not keep.any():
        return segs
    out = segs[keep].copy()
    out[0, 0] = segs[0, 0]
    out[-1, 1] = segs[-1, 1]
    out[1:, 0] = out[:-1, 1]
    return out


def left_monotone_violations(t: CouplingTriple, limit: int = 10) -> list[tuple[int, int]]:
    """Pairs i < j with R[j] strictly inside (R[i], S[i])."""
    out: list[tuple[int, int]] = []
    R, S = t.R, t.S
    for j in range(1, R.size):
        bad = np.flatnonzero((R[:j] < R[j]) & (R[j] < S[:j]))
        out.extend((int(i), j) for i in bad[: limit - len(out)])
        if len(out) >= limit:
            break
    return out


def y_marginal(t: CouplingTriple) -> AtomicMeasure:
    atoms = []
    ell = t.lengths
    for i in range(t.R.size):
        r, g, s = t.R[i], t.G[i], t.S[i]
        if s == g:
            atoms.append((g, ell[i]))
        else:
            atoms.append((r, ell[i] * (s - g) / (s - r)))
            atoms.append((s, ell[i] * (g - r) / (s - r)))
    return AtomicMeasure.from_atoms(atoms)


def conditional_drift(t: CouplingTriple) -> dict[float, float]:
    """E[(Y - X) 1{X = x}] per source atom x; zero for a martingale."""
    out: dict[float, float] = {}
    ell = t.lengths
    for i in range(t.R.size):
        r, g, s = t.R[i], t.G[i], t.S[i]
        if s == g:
            d = 0.0
        else:
            pr = (s - g) / (s - r)
            d = ell[i] * (pr * (r - g) + (1 - pr) * (s - g))
        out[float(g)] = out.get(float(g), 0.0) + d
    return out


def total_variation(a: AtomicMeasure, b: AtomicMeasure) -> float:
    xs = np.union1d(a.x, b.x)
    fa = np.zeros(xs.size)
    fb = np.zeros(xs.size)
    fa[np.searchsorted(xs, a.x)] = a.m
    fb[np.searchsorted(xs, b.x)] = b.m
    return 0.5 * float(np.abs(fa - fb).sum())


def certify(t: CouplingTriple, mu: AtomicMeasure, nu: AtomicMeasure) -> list[str]:
    """All structural and marginal checks; returns human-readable failures."""
    msgs = []
    if np.any(t.R > t.G) or np.any(t.G > t.S):
        msgs.append("ordering R <= G <= S violated")
    if np.any(np.diff(t.S) < 0):
        msgs.append("S not nondecreasing")
    bad = left_monotone_violations(t)
    if bad:
        msgs.append(f"left-monotonicity violated at piece pairs {bad}")
    if np.any(t.lengths <= 0):
        msgs.append("empty or reversed pieces")
    if abs(t.u[0]) > 1e-12 or abs(t.u[-1] - 1.0) > 1e-12:
        msgs.append("pieces do not tile (0,1]")
    # G must be the quantile step function of mu
    cum = np.cumsum(mu.m)
    for i, x in enumerate(mu.x):
        sel = t.G == x
        if not sel.any():
            msgs.append(f"source atom {x!r} missing from G")
            continue
        lo = cum[i - 1] if i else 0.0
        if abs(t.u[:-1][sel].min() - lo) > 1e-12 or abs(t.u[1:][sel].max() - cum[i]) > 1e-12:
            msgs.append(f"G does not match the quantile of mu at atom {x!r}")
    if not np.all(np.isin(t.G, mu.x)):
        msgs.append("G takes values outside the support of mu")
    tv = total_variation(y_marginal(t), nu)
    if tv > MARGINAL_TOL:
        msgs.append(f"second marginal off by total variation {tv:.3e}")
    drift = max((abs(d) for d in conditional_drift(t).values()), default=0.0)
    if drift > MARTINGALE_TOL:
        msgs.append(f"martingale condition off by {drift:.3e}")
    if t.residuals and t.residuals[-1].mass > RESIDUAL_TOL:
        msgs.append(f"final residual has mass {t.residuals[-1].mass:.3e}")
    if t.residual_order_ok and not all(t.residual_order_ok):
        k = t.residual_order_ok.index(False)
        msgs.append(f"residual convex order fails after atom {k}")
    return msgs


@dataclass(frozen=True)
class MassMeanCheck:
    lhs_mass: float
    rhs_mass: float
    lhs_mean: float
    rhs_mean: float

    def max_gap(self) -> float:
        return max(abs(self.lhs_mass - self.rhs_mass), abs(self.lhs_mean - self.rhs_mean))


def check_mass_mean(t: CouplingTriple, mu: AtomicMeasure, nu: AtomicMeasure, u: float) -> MassMeanCheck:
    """Both sides of the mass and mean balance at level u.

    The source side is mu on (R(u), G(u)) plus the part of the atom at G(u)
    used up to u.  The target side is nu on (R(u), S(u)) plus the boundary
    masses at R(u) and S(u); those are read off the triple as the Y-mass that
    the same set of u' lands on the two endpoints.
    """
    if not 0.0 < u < 1.0:
        raise ValueError("u must lie in (0,1)")
    r, g, s = t.at(u)
    inner_mu = mu.restrict_open(r, g)
    f_below = float(mu.cdf(g)) - mu.mass_at(g)
    top_mu = u - f_below
    lhs_mass = inner_mu.mass + top_mu
    lhs_mean = inner_mu.first_moment + top_mu * g

    # contributing u': u' <= u with G(u') in (R(u), G(u)]
    used = []
    for i in range(t.R.size):
        lo, hi = t.u[i], min(t.u[i + 1], u)
        if hi <= lo:
            break
        if r < t.G[i] <= g or t.G[i] == g:
            used.append((lo, hi, t.R[i], t.G[i], t.S[i]))
    y_atoms = []
    for lo, hi, ri, gi, si in used:
        ell = hi - lo
        if si == gi:
            y_atoms.append((gi, ell))
        else:
            y_atoms.append((ri, ell * (si - gi) / (si - ri)))
            y_atoms.append((si, ell * (gi - ri) / (si - ri)))
    y_law = AtomicMeasure.from_atoms(y_atoms)
    lam_r = y_law.mass_at(r)
    lam_s = y_law.mass_at(s) if s != r else 0.0
    inner_nu = nu.restrict_open(r, s)
    rhs_mass = inner_nu.mass + lam_r + lam_s
    rhs_mean = inner_nu.first_moment + lam_r * r + lam_s * s
    return MassMeanCheck(lhs_mass, rhs_mass, lhs_mean, rhs_mean)


def fg_view(t: CouplingTriple) -> list[tuple[float, list[tuple[float, float]]]]:
    """For each source atom x, the (f, g) = (R, S) values it is mapped through.

    A single entry means f and g are single-valued at x; several entries are
    the multi-valued case on an atom of mu.
    """
    out: list[tuple[float, list[tuple[float, float]]]] = []
    for x in np.unique(t.G):
        sel = t.G == x
        pairs = []
        for r, s in zip(t.R[sel], t.S[sel]):
            if (float(r), float(s)) not in pairs:
                pairs.append((float(r), float(s)))
        out.append((float(x), pairs))
    return out

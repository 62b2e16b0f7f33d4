"""The martingale (X, Y) = (G(U), Y(U, V)) induced by a triple."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .curtain import CouplingTriple
from .measures import AtomicMeasure


class UncertifiedTripleError(ValueError):
    pass


@dataclass(frozen=True)
class JointLaw:
    """Atoms (x, y, mass) of a law on the plane, duplicates merged."""

    x: np.ndarray
    y: np.ndarray
    m: np.ndarray

    def first_marginal(self) -> AtomicMeasure:
        return AtomicMeasure.from_atoms(zip(self.x, self.m))

    def second_marginal(self) -> AtomicMeasure:
        return AtomicMeasure.from_atoms(zip(self.y, self.m))

    def drift_by_x(self) -> dict[float, float]:
        out: dict[float, float] = {}
        for x, y, m in zip(self.x.tolist(), self.y.tolist(), self.m.tolist()):
            out[x] = out.get(x, 0.0) + (y - x) * m
        return out

    def mean_abs_increment(self) -> float:
        return float(np.dot(np.abs(self.y - self.x), self.m))

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["x", "y", "mass"])
        for row in zip(self.x, self.y, self.m):
            wr.writerow([f"{v:.17g}" for v in row])
        return buf.getvalue()


def y_of(t: CouplingTriple, u: float, v: float) -> float:
    r, g, s = t.at(u)
    if g == s:
        return g
    return r if v <= (s - g) / (s - r) else s


def _require(t: CouplingTriple) -> None:
    if not t.certified:
        raise UncertifiedTripleError("triple failed certification: " + "; ".join(t.diagnostics))


def joint_law(t: CouplingTriple, mu: AtomicMeasure | None = None) -> JointLaw:
    """Exact pushforward of Lebesgue measure on (0,1)^2 under (u, v) -> (X, Y).

    ``mu`` is accepted for interface symmetry; the triple already carries G.
    """
    _require(t)
    acc: dict[tuple[float, float], float] = {}
    ell = t.lengths
    for i in range(t.R.size):
        r, g, s = float(t.R[i]), float(t.G[i]), float(t.S[i])
        if g == s:
            parts = [(g, ell[i])]
        else:
            parts = [(r, ell[i] * (s - g) / (s - r)), (s, ell[i] * (g - r) / (s - r))]
        for y, m in parts:
            if m > 0:
                acc[(g, y)] = acc.get((g, y), 0.0) + m
    keys = sorted(acc)
    return JointLaw(np.array([k[0] for k in keys]), np.array([k[1] for k in keys]),
                    np.array([acc[k] for k in keys]))


def transport_cost(t: CouplingTriple) -> float:
    """Integral of (S - G)(G - R) / (S - R) over pieces where S > G."""
    _require(t)
    live = t.S > t.G
    r, g, s = t.R[live], t.G[live], t.S[live]
    return float(np.sum(t.lengths[live] * (s - g) * (g - r) / (s - r)))


def sample(t: CouplingTriple, seed: int, n: int) -> np.ndarray:
    """n draws of (X, Y) as an (n, 2) array.

    Uses numpy's PCG64 generator; the same seed gives bit-identical output.
    """
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.Generator(np.random.PCG64(seed))
    uv = rng.random((n, 2))
    u = 1.0 - uv[:, 0]  # lands in (0, 1]
    v = uv[:, 1]
    idx = np.clip(np.searchsorted(t.u, u, side="left") - 1, 0, t.R.size - 1)
    r, g, s = t.R[idx], t.G[idx], t.S[idx]
    with np.errstate(divide="ignore", invalid="ignore"):
        thresh = np.where(s > g, (s - g) / (s - r), 0.0)
    y = np.where(s == g, g, np.where(v <= thresh, r, s))
    return np.column_stack((g, y))


def samples_to_csv(xy: np.ndarray) -> str:
    lines = ["x,y"]
    lines.extend(f"{x:.17g},{y:.17g}" for x, y in xy)
    return "\n".join(lines) + "\n"

"""Finitely supported measures on the real line.

Everything downstream (embeddings, couplings, pricing) is finite linear
algebra over these objects, so positions and masses are plain float arrays
compared with fixed absolute tolerances.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, Union

import numpy as np
from scipy import integrate

MERGE_TOL = 1e-12
MASS_TOL = 1e-12

Quantile = Callable[[float], float]


class EmptyMeasureError(ValueError):
    pass


class NotDominatedError(ValueError):
    pass


@dataclass(frozen=True)
class AtomicMeasure:
    """Nonnegative measure with finitely many atoms.

    ``x`` is strictly increasing and every entry of ``m`` is positive.  The
    total mass may be below one: residual targets are sub-probabilities.
    Build instances with :meth:`from_atoms` so coincident positions are merged.
    """

    x: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        x = np.ascontiguousarray(self.x, dtype=float)
        m = np.ascontiguousarray(self.m, dtype=float)
        if x.ndim != 1 or x.shape != m.shape:
            raise ValueError("positions and masses must be 1-D arrays of equal length")
        if x.size and not np.all(np.diff(x) > MERGE_TOL):
            raise ValueError("positions must be strictly increasing")
        if np.any(m <= 0):
            raise ValueError("masses must be positive")
        if m.sum() > 1 + MASS_TOL:
            raise ValueError(f"total mass {m.sum()!r} exceeds 1")
        x.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "m", m)

    @classmethod
    def from_atoms(cls, atoms: Iterable[Sequence[float]], drop_below: float = 0.0) -> "AtomicMeasure":
        """Build from ``(position, mass)`` pairs, merging positions closer than MERGE_TOL."""
        pairs = sorted((float(a), float(b)) for a, b in atoms)
        xs: list[float] = []
        ms: list[float] = []
        for pos, mass in pairs:
            if mass < 0:
                raise ValueError("masses must be nonnegative")
            if xs and pos - xs[-1] <= MERGE_TOL:
                ms[-1] += mass
            else:
                xs.append(pos)
                ms.append(mass)
        keep = [i for i, mass in enumerate(ms) if mass > drop_below]
        return cls(np.array([xs[i] for i in keep]), np.array([ms[i] for i in keep]))

    @classmethod
    def point(cls, w: float, mass: float = 1.0) -> "AtomicMeasure":
        return cls(np.array([float(w)]), np.array([float(mass)]))

    @classmethod
    def empty(cls) -> "AtomicMeasure":
        return cls(np.empty(0), np.empty(0))

    def __len__(self) -> int:
        return self.x.size

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.x.tolist(), self.m.tolist()))

    @property
    def mass(self) -> float:
        return float(self.m.sum())

    @property
    def first_moment(self) -> float:
        return float(np.dot(self.x, self.m))

    @property
    def is_empty(self) -> bool:
        return self.x.size == 0

    @property
    def support(self) -> tuple[float, float]:
        if self.is_empty:
            raise EmptyMeasureError("empty measure")
        return float(self.x[0]), float(self.x[-1])

    def mass_at(self, y: float, tol: float = MERGE_TOL) -> float:
        i = np.searchsorted(self.x, y - tol)
        if i < self.x.size and abs(self.x[i] - y) <= tol:
            return float(self.m[i])
        return 0.0

    def restrict_open(self, lo: float, hi: float) -> "AtomicMeasure":
        """Restriction to the open interval (lo, hi)."""
        sel = (self.x > lo + MERGE_TOL) & (self.x < hi - MERGE_TOL)
        return AtomicMeasure(self.x[sel], self.m[sel])

    def put(self, k):
        """Vectorised put function k -> sum m (k - x)^+."""
        k = np.asarray(k, dtype=float)
        return np.maximum(k[..., None] - self.x, 0.0) @ self.m

    def cdf(self, k):
        k = np.asarray(k, dtype=float)
        return (self.x <= k[..., None]).astype(float) @ self.m

    def to_json(self) -> dict:
        return {"atoms": [[float(a), float(b)] for a, b in self.atoms]}


@dataclass(frozen=True)
class PutFunction:
    """The put function of an atomic measure as a convex piecewise-linear curve.

    ``values[i]`` is P at ``kinks[i]``; ``right_slopes[i]`` is the slope just
    right of that kink (the cumulative mass), ``left_slopes[i]`` just left.
    """

    kinks: np.ndarray
    values: np.ndarray
    left_slopes: np.ndarray
    right_slopes: np.ndarray
    total_mass: float
    measure: AtomicMeasure = field(repr=False)

    @classmethod
    def of(cls, eta: AtomicMeasure) -> "PutFunction":
        x, m = eta.x, eta.m
        cum = np.cumsum(m)
        left = np.concatenate(([0.0], cum[:-1])) if x.size else np.empty(0)
        # P(x_j) = sum_{i<j} m_i (x_j - x_i), accumulated along the kinks.
        vals = np.zeros_like(x)
        if x.size > 1:
            vals[1:] = np.cumsum(left[1:] * np.diff(x))
        return cls(x, vals, left, cum, float(cum[-1]) if x.size else 0.0, eta)

    def __call__(self, k):
        return self.measure.put(k)

    def right_slope_at(self, k: float) -> float:
        return float(self.measure.cdf(k))

    def left_slope_at(self, k: float) -> float:
        return float(self.measure.cdf(k)) - self.measure.mass_at(k)


def put_value(eta: AtomicMeasure, k: float) -> float:
    return float(eta.put(k))


def barycentre(eta: AtomicMeasure) -> float:
    if eta.is_empty or eta.mass <= 0:
        raise EmptyMeasureError("empty measure")
    return eta.first_moment / eta.mass


def quantile(eta: AtomicMeasure, u: float) -> float:
    """Left-continuous quantile of a probability measure."""
    if not 0.0 < u < 1.0:
        raise ValueError(f"quantile level must lie in (0,1), got {u!r}")
    if abs(eta.mass - 1.0) > MASS_TOL:
        raise ValueError("quantile requires a probability measure")
    cum = np.cumsum(eta.m)
    i = int(np.searchsorted(cum, u - MASS_TOL, side="left"))
    return float(eta.x[min(i, eta.x.size - 1)])


def _scale(*measures: AtomicMeasure) -> float:
    xs = [np.abs(e.x).max() for e in measures if not e.is_empty]
    return 1.0 + (max(xs) if xs else 0.0)


def convex_order_leq(eta: AtomicMeasure, chi: AtomicMeasure, tol: float = 1e-12) -> bool:
    """True iff eta <=cx chi.

    Masses must agree to ``tol``; first moments and put values are compared
    with ``tol`` scaled by 1 + max|x| so that residual measures far from the
    origin are not rejected for rounding noise.
    """
    if abs(eta.mass - chi.mass) > tol:
        return False
    if eta.is_empty and chi.is_empty:
        return True
    if eta.is_empty or chi.is_empty:
        return False
    scale = _scale(eta, chi)
    if abs(eta.first_moment - chi.first_moment) > tol * scale:
        return False
    kinks = np.union1d(eta.x, chi.x)
    return bool(np.all(eta.put(kinks) <= chi.put(kinks) + tol * scale))


def subtract(eta: AtomicMeasure, zeta: AtomicMeasure, tol: float = MASS_TOL) -> AtomicMeasure:
    """Atomwise difference eta - zeta; residual atoms of mass <= tol are dropped."""
    out = dict(zip(eta.x.tolist(), eta.m.tolist()))
    for y, mass in zeta.atoms:
        i = np.searchsorted(eta.x, y - MERGE_TOL)
        if i < eta.x.size and abs(eta.x[i] - y) <= MERGE_TOL:
            key = float(eta.x[i])
            out[key] -= mass
            if out[key] < -tol:
                raise NotDominatedError(f"not dominated at {y!r}: short by {-out[key]!r}")
        elif mass > tol:
            raise NotDominatedError(f"not dominated at {y!r}: no atom to subtract from")
    return AtomicMeasure.from_atoms(((y, max(v, 0.0)) for y, v in out.items()), drop_below=tol)


def uniform_quantile(a: float, b: float) -> Quantile:
    return lambda u: a + (b - a) * u


def empirical_quantile(samples: Sequence[float]) -> Quantile:
    data = np.sort(np.asarray(samples, dtype=float))
    n = data.size

    def g(u: float) -> float:
        return float(data[min(int(np.ceil(u * n)) - 1, n - 1) if u > 0 else 0])

    return g


def _bin_means_sorted(data: np.ndarray, n: int) -> np.ndarray:
    # Exact mean of the empirical quantile over each bin, splitting samples
    # that straddle a bin edge.
    N = data.size
    edges = np.linspace(0.0, N, n + 1)
    csum = np.concatenate(([0.0], np.cumsum(data)))

    def integral(t):
        j = np.minimum(np.floor(t).astype(int), N - 1)
        frac = t - j
        return csum[j] + frac * data[j]

    ends = integral(edges)
    ends[-1] = csum[-1]
    return np.diff(ends) / (N / n)


def discretize(source: Union[Quantile, Sequence[float]], n: int) -> AtomicMeasure:
    """n-atom approximation below the source in convex order.

    (0,1) is cut into n equal bins and each bin contributes its conditional
    mean with mass 1/n.  Accepts a quantile function or a list of samples.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    if callable(source):
        means = np.empty(n)
        for i in range(n):
            lo, hi = i / n, (i + 1) / n
            with warnings.catch_warnings():
                warnings.simplefilter("error", integrate.IntegrationWarning)
                try:
                    val, _ = integrate.quad(source, lo, hi, limit=200)
                except integrate.IntegrationWarning as exc:
                    raise ValueError(f"source not integrable on bin {i}: {exc}") from None
            if not np.isfinite(val):
                raise ValueError(f"source not integrable on bin {i}")
            means[i] = val * n
    else:
        data = np.sort(np.asarray(source, dtype=float))
        if data.size == 0 or not np.all(np.isfinite(data)):
            raise ValueError("samples must be a nonempty list of finite numbers")
        means = _bin_means_sorted(data, n)
    return AtomicMeasure.from_atoms(zip(means, np.full(n, 1.0 / n)))


def measure_from_spec(spec: dict) -> Union[AtomicMeasure, tuple[Quantile, int]]:
    """Parse the JSON measure format; returns the discretised measure."""
    if "atoms" in spec:
        return AtomicMeasure.from_atoms(spec["atoms"])
    if "uniform" in spec:
        a, b = spec["uniform"]
        return discretize(uniform_quantile(float(a), float(b)), int(spec["n"]))
    if "samples" in spec:
        return discretize(list(spec["samples"]), int(spec["n"]))
    raise ValueError("measure spec needs one of 'atoms', 'uniform', 'samples'")


def quantile_from_spec(spec: dict) -> Quantile:
    """Quantile function of the source described by a JSON spec (before discretisation)."""
    if "uniform" in spec:
        a, b = spec["uniform"]
        return uniform_quantile(float(a), float(b))
    if "samples" in spec:
        return empirical_quantile(spec["samples"])
    if "atoms" in spec:
        eta = AtomicMeasure.from_atoms(spec["atoms"])
        return lambda u: quantile(eta, u)
    raise ValueError("measure spec needs one of 'atoms', 'uniform', 'samples'")

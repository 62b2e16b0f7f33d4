"""Random convex-ordered atomic pairs and the worked fixtures used in tests."""

from __future__ import annotations

import numpy as np

from .measures import AtomicMeasure, discretize, uniform_quantile


def random_pair(rng: np.random.Generator, max_mu: int = 10, max_nu: int = 40,
                grid: float = 0.25, span: int = 24) -> tuple[AtomicMeasure, AtomicMeasure]:
    """mu with at most ``max_mu`` atoms and nu obtained by martingale splitting.

    Positions live on a grid so that atoms of mu and nu coincide often; each
    split moves mass q at y to a < y < b with weights preserving the mean, so
    mu <=cx nu holds by construction.
    """
    k = int(rng.integers(1, max_mu + 1))
    xs = rng.choice(np.arange(-span // 2, span // 2 + 1), size=k, replace=False) * grid
    ms = rng.dirichlet(np.ones(k))
    mu = AtomicMeasure.from_atoms(zip(xs, ms))
    pieces = {float(x): float(m) for x, m in mu.atoms}
    n_splits = int(rng.integers(0, 3 * max_nu))
    for _ in range(n_splits):
        y = float(rng.choice(list(pieces)))
        q = pieces[y]
        a = y - grid * int(rng.integers(1, 9))
        b = y + grid * int(rng.integers(1, 9))
        keep = q * float(rng.choice([0.0, 0.0, rng.uniform(0.1, 0.6)]))
        moved = q - keep
        new = dict(pieces)
        if keep > 0:
            new[y] = keep
        else:
            del new[y]
        new[a] = new.get(a, 0.0) + moved * (b - y) / (b - a)
        new[b] = new.get(b, 0.0) + moved * (y - a) / (b - a)
        if len(new) > max_nu:
            break
        pieces = new
    return mu, AtomicMeasure.from_atoms(pieces.items())


def random_pairs(n: int, seed: int = 0, **kw) -> list[tuple[AtomicMeasure, AtomicMeasure]]:
    rng = np.random.default_rng(seed)
    return [random_pair(rng, **kw) for _ in range(n)]


def three_point() -> tuple[AtomicMeasure, AtomicMeasure]:
    return AtomicMeasure.point(0.0), AtomicMeasure.from_atoms([(-2, 0.25), (0, 0.5), (2, 0.25)])


def two_atom() -> tuple[AtomicMeasure, AtomicMeasure]:
    return (AtomicMeasure.from_atoms([(-1, 0.5), (1, 0.5)]),
            AtomicMeasure.from_atoms([(-2, 0.5), (2, 0.5)]))


def trivial_uniform(n: int = 2000) -> tuple[AtomicMeasure, AtomicMeasure]:
    """delta_1 against the n-bin discretisation of U[0,2]."""
    return AtomicMeasure.point(1.0), discretize(uniform_quantile(0.0, 2.0), n)

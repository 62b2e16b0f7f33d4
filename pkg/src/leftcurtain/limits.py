"""Envelopes for S and R, and an empirical convergence probe under refinement."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .coupling import JointLaw, joint_law
from .curtain import CouplingTriple, build_left_curtain
from .measures import AtomicMeasure, Quantile, convex_order_leq, discretize

TIE_TOL = 1e-12


def quantile_right(mu: AtomicMeasure, u: float) -> float:
    """G(u+): the smallest atom with cumulative mass strictly above u."""
    cum = np.cumsum(mu.m)
    i = int(np.searchsorted(cum, u + TIE_TOL, side="right"))
    return float(mu.x[min(i, mu.x.size - 1)])


def tangent_point(mu: AtomicMeasure, nu: AtomicMeasure, k: float) -> float:
    """Largest kink where the right tangent from (k, P_mu(k)) meets P_nu."""
    kinks = nu.x[nu.x > k + TIE_TOL]
    if kinks.size == 0:
        return float(k)
    ratio = (nu.put(kinks) - float(mu.put(k))) / (kinks - k)
    best = ratio.min()
    scale = 1.0 + np.abs(ratio).max()
    return float(kinks[np.flatnonzero(ratio <= best + TIE_TOL * scale)[-1]])


def bound_J(mu: AtomicMeasure, nu: AtomicMeasure, u: float) -> float:
    """J_+(u) = K(G(u+)); S(u) never exceeds it."""
    if not 0.0 < u < 1.0:
        raise ValueError("u must lie in (0,1)")
    return tangent_point(mu, nu, quantile_right(mu, u))


def bound_j(mu: AtomicMeasure, nu: AtomicMeasure, u: float, steps: int = 60) -> Optional[float]:
    """A level j with R(u) >= j, or None when the slope-u tangent touches P_nu.

    l1 is the tangent to P_mu with slope u at G(u); H is its root.  eps is
    halved from P_nu(H) until the line through (H, eps) with slope u + eps
    stays below P_nu; j is then the largest kink where both tangents have
    slope below eps and the P_nu tangent is below eps where the P_mu
    tangent meets l1.
    """
    if not 0.0 < u < 1.0:
        raise ValueError("u must lie in (0,1)")
    cum = np.cumsum(mu.m)
    g = float(mu.x[min(int(np.searchsorted(cum, u - TIE_TOL, side="left")), mu.x.size - 1)])
    pg = float(mu.put(g))
    kinks = np.union1d(mu.x, nu.x)
    pnu = nu.put(kinks)
    l1 = pg + u * (kinks - g)
    scale = 1.0 + np.abs(kinks).max()
    if np.min(pnu - l1) <= TIE_TOL * scale:
        return None
    h = g - pg / u
    eps = float(nu.put(h))
    if eps <= 0:
        eps = float(np.min(pnu - l1))
    for _ in range(steps):
        line = eps + (u + eps) * (kinks - h)
        if u + eps <= nu.mass and np.all(line < pnu):
            break
        eps *= 0.5
    else:
        return None
    # gamma: where the tangent to P_mu at j meets l1; the tangent to P_nu at
    # j must sit below eps there
    fm, fn = mu.cdf(kinks), nu.cdf(kinks)
    pm = mu.put(kinks)
    with np.errstate(divide="ignore", invalid="ignore"):
        gamma = (pm - fm * kinks + u * h) / (u - fm)
    l4 = pnu + fn * (gamma - kinks)
    ok = (fm < eps) & (fn < eps) & (fm < u) & (l4 < eps)
    if not ok.any():
        return float(kinks[0] - 1.0)
    return float(kinks[np.flatnonzero(ok)[-1]])


@dataclass
class EnvelopeReport:
    u: np.ndarray
    S: np.ndarray
    J_plus: np.ndarray
    R: np.ndarray
    j: list[Optional[float]]
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def envelope_check(t: CouplingTriple, mu: AtomicMeasure, nu: AtomicMeasure,
                   tol: float = 1e-12) -> EnvelopeReport:
    """S <= J_+ and R >= j at every piece midpoint."""
    us = t.midpoints()
    Jp = np.array([bound_J(mu, nu, u) for u in us])
    js: list[Optional[float]] = []
    viol = []
    for i, u in enumerate(us):
        if t.S[i] > Jp[i] + tol:
            viol.append(f"S({u:.6g}) = {t.S[i]:.6g} above J+ = {Jp[i]:.6g}")
        jv = bound_j(mu, nu, u) if quantile_right(mu, u) < t.S[i] else None
        js.append(jv)
        if jv is not None and t.R[i] < jv - tol:
            viol.append(f"R({u:.6g}) = {t.R[i]:.6g} below j = {jv:.6g}")
    return EnvelopeReport(us, t.S.copy(), Jp, t.R.copy(), js, viol)


def wasserstein1(a: JointLaw, b: JointLaw) -> float:
    """Exact W1 between two atomic laws on the plane with L1 ground cost."""
    pa, pb = np.column_stack((a.x, a.y)), np.column_stack((b.x, b.y))
    wa, wb = a.m / a.m.sum(), b.m / b.m.sum()
    na, nb = wa.size, wb.size
    cost = np.abs(pa[:, None, :] - pb[None, :, :]).sum(axis=2).ravel()
    rows_a = sparse.kron(sparse.eye(na), np.ones((1, nb)))
    rows_b = sparse.kron(np.ones((1, na)), sparse.eye(nb))
    A = sparse.vstack((rows_a, rows_b)).tocsr()
    res = linprog(cost, A_eq=A, b_eq=np.concatenate((wa, wb)), bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError(f"W1 LP failed: {res.message}")
    return float(res.fun)


@dataclass
class ProbeReport:
    ns: list[int]
    grid: np.ndarray
    excluded: np.ndarray
    S: dict[int, np.ndarray]
    G: dict[int, np.ndarray]
    R: dict[int, np.ndarray]
    J_plus: np.ndarray
    dev_S: dict[int, float]
    dev_G: dict[int, float]
    w1: list[tuple[int, int, float]]
    j: list[Optional[float]] = field(default_factory=list)
    skipped: dict[int, str] = field(default_factory=dict)

    def w1_nonincreasing(self, slack: float = 0.10) -> bool:
        d = [w for _, _, w in self.w1]
        return all(d[i + 1] <= (1.0 + slack) * d[i] for i in range(len(d) - 1))

    def deviations_shrink(self) -> bool:
        ns = [n for n in self.ns if n in self.dev_S and n != max(self.S)]
        ds = [self.dev_S[n] for n in ns]
        dg = [self.dev_G[n] for n in ns]
        return all(ds[i + 1] <= ds[i] for i in range(len(ds) - 1)) and \
            all(dg[i + 1] <= dg[i] for i in range(len(dg) - 1))

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["n", "u", "S_n", "G_n", "R_n", "J_plus", "j"])
        for n in self.ns:
            if n not in self.S:
                continue
            for i, u in enumerate(self.grid):
                jv = self.j[i] if i < len(self.j) else None
                wr.writerow([n] + [f"{v:.17g}" for v in (u, self.S[n][i], self.G[n][i], self.R[n][i],
                                                          self.J_plus[i])] + ["" if jv is None else f"{jv:.17g}"])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "ns": self.ns,
            "excluded_points": [float(u) for u, e in zip(self.grid, self.excluded) if e],
            "dev_S": {str(n): v for n, v in self.dev_S.items()},
            "dev_G": {str(n): v for n, v in self.dev_G.items()},
            "w1": [{"n_from": a, "n_to": b, "w1": w} for a, b, w in self.w1],
            "w1_nonincreasing": self.w1_nonincreasing(),
            "deviations_shrink": self.deviations_shrink(),
            "skipped": {str(n): msg for n, msg in self.skipped.items()},
        }

    def dumps(self) -> str:
        return json.dumps(self.summary(), indent=1)


def _jump_points(t: CouplingTriple, grid: np.ndarray, delta: float, jump: float) -> np.ndarray:
    out = np.zeros(grid.size, dtype=bool)
    for i, u in enumerate(grid):
        lo, hi = max(u - delta, 1e-15), min(u + delta, 1.0)
        a, b = t.piece(lo), t.piece(hi)
        for arr in (t.R, t.G, t.S):
            seg = arr[a:b + 1]
            if seg.max() - seg.min() > jump:
                out[i] = True
    return out


def convergence_probe(source: Quantile | AtomicMeasure, nu: AtomicMeasure, ns: Sequence[int],
                      grid: Sequence[float], jump: float = 0.05) -> ProbeReport:
    """Triples for mu_n = discretize(mu, n) against a fixed nu.

    Deviations are taken against the largest n on grid points away from
    jumps of that triple; W1 is computed between successive joint laws.
    """
    grid = np.asarray(grid, dtype=float)
    ns = sorted(int(n) for n in ns)
    triples: dict[int, CouplingTriple] = {}
    laws: dict[int, JointLaw] = {}
    skipped: dict[int, str] = {}
    mus: dict[int, AtomicMeasure] = {}
    for n in ns:
        mu_n = source if isinstance(source, AtomicMeasure) else discretize(source, n)
        if not convex_order_leq(mu_n, nu):
            skipped[n] = "discretised source not below target in convex order"
            continue
        t = build_left_curtain(mu_n, nu)
        if not t.certified:
            skipped[n] = "; ".join(t.diagnostics)
            continue
        triples[n], laws[n], mus[n] = t, joint_law(t), mu_n
    if not triples:
        raise ValueError("no admissible discretisation")
    top = max(triples)
    tN = triples[top]
    delta = 2.0 / top + 1e-12
    excluded = _jump_points(tN, grid, delta, jump)
    vals = {n: np.array([t.at(u) for u in grid]) for n, t in triples.items()}
    S = {n: v[:, 2] for n, v in vals.items()}
    G = {n: v[:, 1] for n, v in vals.items()}
    R = {n: v[:, 0] for n, v in vals.items()}
    keep = ~excluded
    dev_S = {n: float(np.max(np.abs(S[n] - S[top])[keep], initial=0.0)) for n in triples}
    dev_G = {n: float(np.max(np.abs(G[n] - G[top])[keep], initial=0.0)) for n in triples}
    Jp = np.array([bound_J(mus[top], nu, u) for u in grid])
    kept = sorted(triples)
    w1 = [(a, b, wasserstein1(laws[a], laws[b])) for a, b in zip(kept, kept[1:])]
    js = [bound_j(mus[top], nu, u) for u in grid]
    return ProbeReport(ns, grid, excluded, S, G, R, Jp, dev_S, dev_G, w1, js, skipped)

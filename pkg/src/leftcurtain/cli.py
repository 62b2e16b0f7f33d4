"""Command line front end: build, verify, sample, price, probe."""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import american_put as ap
from .coupling import sample, samples_to_csv
from .curtain import ConvexOrderError, CouplingTriple, EmbeddingError, build_left_curtain, certify, check_mass_mean
from .limits import convergence_probe, envelope_check
from .measures import AtomicMeasure, convex_order_leq, measure_from_spec, quantile_from_spec

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_ORDER = 3
EXIT_CERT = 4


class InputError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    mu: Optional[Path] = None
    nu: Optional[Path] = None
    out: Optional[Path] = None
    triple: Optional[Path] = None
    seed: int = 0
    n: int = 1000
    k1: Optional[float] = None
    k2: Optional[float] = None
    grid: int = 19
    ns: list[int] = field(default_factory=lambda: [10, 100, 1000])

    def validate(self) -> None:
        if self.mu is None or self.nu is None:
            raise InputError("--mu and --nu are required")
        if self.command == "price":
            if self.k1 is None or self.k2 is None:
                raise InputError("--k1 and --k2 are required for price")
            if not self.k2 < self.k1:
                raise InputError("strikes violate K2<K1")
        if self.command == "sample" and self.n < 1:
            raise InputError("--n must be positive")
        if self.command == "probe" and self.grid < 1:
            raise InputError("--grid must be positive")


def fmt(v) -> str:
    """JSON text with every float written to 17 significant digits."""
    if isinstance(v, bool) or v is None:
        return json.dumps(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "null"
        if math.isinf(v):
            return '"inf"' if v > 0 else '"-inf"'
        return format(v, ".17g")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {fmt(x)}" for k, x in v.items()) + "}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(fmt(x) for x in v) + "]"
    raise TypeError(f"cannot serialise {type(v).__name__}")


def _read_json(path: Path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {path}: {exc}") from None
    if not isinstance(data, dict):
        raise InputError(f"{path}: expected a JSON object")
    return data


def load_measure(path: Path) -> AtomicMeasure:
    spec = _read_json(path)
    try:
        return measure_from_spec(spec)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"bad measure spec in {path}: {exc}") from None


def _emit(text: str, out: Optional[Path], suffix: str = "") -> None:
    if out is None:
        sys.stdout.write(text)
        return
    path = out if not suffix else out.with_suffix(suffix)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _build(cfg: RunConfig) -> tuple[AtomicMeasure, AtomicMeasure, CouplingTriple]:
    mu, nu = load_measure(cfg.mu), load_measure(cfg.nu)
    t = build_left_curtain(mu, nu)
    return mu, nu, t


def cmd_build(cfg: RunConfig) -> int:
    _, _, t = _build(cfg)
    if cfg.out is None:
        sys.stdout.write(t.to_csv())
    else:
        _emit(t.to_csv(), cfg.out, ".csv")
        _emit(fmt(t.to_json()) + "\n", cfg.out, ".json")
    if not t.certified:
        sys.stderr.write("certification failed:\n" + "\n".join(t.diagnostics) + "\n")
        return EXIT_CERT
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    mu, nu = load_measure(cfg.mu), load_measure(cfg.nu)
    if not convex_order_leq(mu, nu):
        raise ConvexOrderError("marginals not in convex order")
    if cfg.triple is not None:
        try:
            t = CouplingTriple.from_json(_read_json(cfg.triple))
        except (KeyError, ValueError) as exc:
            raise InputError(f"bad triple in {cfg.triple}: {exc}") from None
        t.diagnostics = certify(t, mu, nu)
    else:
        t = build_left_curtain(mu, nu)
    failures = list(t.diagnostics)
    if not failures:
        for u in t.midpoints():
            if 0.0 < u < 1.0:
                gap = check_mass_mean(t, mu, nu, float(u)).max_gap()
                if gap > 1e-9:
                    failures.append(f"mass/mean balance off by {gap:.3e} at u={u:.6g}")
        env = envelope_check(t, mu, nu)
        failures.extend(env.violations)
    lines = [f"pieces {len(t)}", f"status {'ok' if not failures else 'FAILED'}"] + failures
    _emit("\n".join(lines) + "\n", cfg.out)
    return EXIT_OK if not failures else EXIT_CERT


def cmd_sample(cfg: RunConfig) -> int:
    _, _, t = _build(cfg)
    if not t.certified:
        sys.stderr.write("\n".join(t.diagnostics) + "\n")
        return EXIT_CERT
    _emit(samples_to_csv(sample(t, cfg.seed, cfg.n)), cfg.out)
    return EXIT_OK


def cmd_price(cfg: RunConfig) -> int:
    mu, nu, t = _build(cfg)
    if not t.certified:
        sys.stderr.write("\n".join(t.diagnostics) + "\n")
        return EXIT_CERT
    rep = ap.price(t, mu, nu, ap.PutPair(cfg.k1, cfg.k2))
    _emit(fmt(rep.to_json()) + "\n", cfg.out)
    return EXIT_OK


def cmd_probe(cfg: RunConfig) -> int:
    spec = _read_json(cfg.mu)
    nu = load_measure(cfg.nu)
    try:
        source = AtomicMeasure.from_atoms(spec["atoms"]) if "atoms" in spec else quantile_from_spec(spec)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"bad measure spec in {cfg.mu}: {exc}") from None
    grid = np.arange(1, cfg.grid + 1) / (cfg.grid + 1)
    rep = convergence_probe(source, nu, cfg.ns, grid)
    if cfg.out is None:
        sys.stdout.write(rep.to_csv())
        sys.stdout.write(fmt(rep.summary()) + "\n")
    else:
        _emit(rep.to_csv(), cfg.out, ".csv")
        _emit(fmt(rep.summary()) + "\n", cfg.out, ".json")
    return EXIT_OK


COMMANDS = {"build": cmd_build, "verify": cmd_verify, "sample": cmd_sample,
            "price": cmd_price, "probe": cmd_probe}


def run(cfg: RunConfig) -> int:
    try:
        cfg.validate()
        return COMMANDS[cfg.command](cfg)
    except InputError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    except ConvexOrderError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_ORDER
    except EmbeddingError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CERT


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="leftcurtain", description="Left-curtain coupling and American put bounds.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--mu", type=Path, help="JSON spec of the time-1 law")
    p.add_argument("--nu", type=Path, help="JSON spec of the time-2 law")
    p.add_argument("--out", type=Path, help="output path (stdout if omitted)")
    p.add_argument("--triple", type=Path, help="verify: triple JSON written by build")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=1000, help="sample size")
    p.add_argument("--k1", type=float, help="time-1 strike")
    p.add_argument("--k2", type=float, help="time-2 strike")
    p.add_argument("--grid", type=int, default=19, help="probe: number of interior grid points")
    p.add_argument("--ns", type=int, nargs="+", default=[10, 100, 1000], help="probe: discretisation sizes")
    return p


def main(argv: Optional[list[str]] = None) -> int:
    a = parser().parse_args(argv)
    cfg = RunConfig(a.command, a.mu, a.nu, a.out, a.triple, a.seed, a.n, a.k1, a.k2, a.grid, a.ns)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())

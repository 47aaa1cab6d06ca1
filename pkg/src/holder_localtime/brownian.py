"""Reproducible Brownian paths on [0, 1], the Gaussian heat kernel and the
modulus-of-continuity stopping time.

Randomness comes from numpy's Philox generator, which is counter based: the
key is built from ``(master, stream_index)`` so every path of a sweep owns an
independent stream that does not depend on scheduling.  Gaussians are produced
by inverse CDF from 53-bit uniforms rather than by Box-Muller.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.special import ndtri

HORIZON = 1.0
_U64 = 1 << 64


@dataclass(frozen=True)
class Seed:
    master: int
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master < _U64:
            raise ValueError(f"master seed must be a 64-bit unsigned integer, got {self.master}")
        if not 0 <= self.stream_index < _U64:
            raise ValueError(f"stream_index must be a nonnegative 64-bit integer, got {self.stream_index}")

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self.master + (self.stream_index << 64)))

    def child(self, offset: int) -> "Seed":
        """Seed for a parallel family of streams sharing this master."""
        return Seed(self.master, self.stream_index + offset)


def standard_normals(gen: np.random.Generator, size: int) -> np.ndarray:
    # random() is k / 2**53; shifting by half a step keeps u strictly inside (0, 1)
    u = gen.random(size) + 2.0**-54
    return ndtri(u)


def _is_power_of_two(k: int) -> bool:
    return k >= 1 and (k & (k - 1)) == 0


@dataclass(frozen=True)
class BrownianPath:
    """Sampled trajectory ``values[j] = W(j * horizon / n_steps)``."""

    n_steps: int
    values: np.ndarray = field(repr=False)
    seed: Seed | None = None
    horizon: float = HORIZON

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size != self.n_steps + 1:
            raise ValueError("values must hold n_steps + 1 entries")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def coarsen(self, n_steps: int) -> "BrownianPath":
        """Restrict to a coarser dyadic grid (``n_steps`` must divide the current one)."""
        if n_steps > self.n_steps or self.n_steps % n_steps:
            raise ValueError(f"cannot coarsen {self.n_steps} steps to {n_steps}")
        stride = self.n_steps // n_steps
        return BrownianPath(n_steps, self.values[::stride], self.seed, self.horizon)

    def shifted(self, offset: float) -> "BrownianPath":
        return BrownianPath(self.n_steps, self.values + offset, self.seed, self.horizon)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "w"])
            for t, w in zip(self.times, self.values):
                writer.writerow([repr(float(t)), repr(float(w))])


def sample_path(n_steps: int, seed: Seed) -> BrownianPath:
    if not isinstance(n_steps, (int, np.integer)) or n_steps < 2 or not _is_power_of_two(int(n_steps)):
        raise ValueError(f"n_steps must be a power of two >= 2, got {n_steps}")
    n_steps = int(n_steps)
    increments = standard_normals(seed.generator(), n_steps) * math.sqrt(HORIZON / n_steps)
    values = np.empty(n_steps + 1)
    values[0] = 0.0
    np.cumsum(increments, out=values[1:])
    return BrownianPath(n_steps, values, seed)


def synthetic_path(fn: Callable[[np.ndarray], np.ndarray] | float, n_steps: int) -> BrownianPath:
    """Deterministic stand-in for a Brownian path, used by edge-case tests.

    ``values[0]`` is whatever ``fn(0)`` returns; no Brownian invariant is implied.
    """
    times = np.arange(n_steps + 1) * (HORIZON / n_steps)
    values = np.full(times.shape, float(fn)) if np.isscalar(fn) else np.asarray(fn(times), dtype=float)
    return BrownianPath(n_steps, values, None)


def refine_path(path: BrownianPath, factor: int, seed: Seed) -> BrownianPath:
    """Brownian-bridge midpoint refinement by a power-of-two ``factor``.

    Coarse grid values are copied unchanged; every new midpoint is drawn from
    the bridge law given its two neighbours, i.e. their average plus an
    independent N(0, h/4) where h is the current step.
    """
    if factor < 1 or not _is_power_of_two(factor):
        raise ValueError(f"factor must be a positive power of two, got {factor}")
    values = np.array(path.values)
    if factor == 1:
        return BrownianPath(path.n_steps, values, path.seed, path.horizon)
    gen = seed.generator()
    step = path.dt
    while len(values) - 1 < path.n_steps * factor:
        mid = 0.5 * (values[:-1] + values[1:]) + standard_normals(gen, len(values) - 1) * math.sqrt(step / 4.0)
        refined = np.empty(2 * len(values) - 1)
        refined[0::2] = values
        refined[1::2] = mid
        values = refined
        step /= 2.0
    return BrownianPath(path.n_steps * factor, values, path.seed, path.horizon)


def heat_kernel(t, x, y):
    """Transition density p(t, x, y) = (2 pi t)^(-1/2) exp(-(x - y)^2 / 2t)."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("heat_kernel requires t > 0")
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    out = np.exp(-d * d / (2.0 * t)) / np.sqrt(2.0 * np.pi * t)
    return float(out) if out.ndim == 0 else out


_SQRT_2PI = math.sqrt(2.0 * math.pi)


def sqrt_time_nodes(upper: float, quad_points: int, inner: float = 1e-4, inner_points: int = 64):
    """Quadrature nodes/weights in u = sqrt(s) over [0, upper].

    Under s = u^2 the kernel integral  int_0 p(s, x, y) ds  becomes
    int 2/sqrt(2 pi) exp(-(x-y)^2 / 2u^2) du, whose integrand is bounded, so
    the s -> 0 singularity disappears.  Nodes are uniform on [0, inner] and
    geometric on [inner, upper] to resolve the scale u ~ |x - y|.
    """
    if upper <= 0:
        return np.empty(0), np.empty(0)
    inner = min(inner, upper)
    h = inner / inner_points
    u_in = (np.arange(inner_points) + 0.5) * h
    w_in = np.full(inner_points, h)
    if upper <= inner:
        return u_in, w_in
    lo, hi = math.log(inner), math.log(upper)
    dv = (hi - lo) / quad_points
    u_out = np.exp(lo + (np.arange(quad_points) + 0.5) * dv)
    return np.concatenate([u_in, u_out]), np.concatenate([w_in, u_out * dv])


def kernel_integrand_sqrt_time(u: np.ndarray, gap: np.ndarray) -> np.ndarray:
    """p(u^2, 0, gap) * d(u^2)/du, written without the singular prefactor."""
    return (2.0 / _SQRT_2PI) * np.exp(-(gap * gap) / (2.0 * u * u))


def modulus_stopping_time(path: BrownianPath, alpha: float) -> float:
    """First grid time at which |W| >= 1 or some grid pair r, s <= t has
    |W_r - W_s| >= (|r - s| / 4)^alpha; ``horizon`` if neither happens.

    Only grid pairs are inspected, so this is a lower-resolution surrogate of
    the continuum stopping time.
    """
    if not 0 < alpha < 0.5:
        raise ValueError(f"alpha must lie in (0, 1/2), got {alpha}")
    w = path.values
    n = path.n_steps
    exits = np.flatnonzero(np.abs(w) >= 1.0)
    first = int(exits[0]) if exits.size else n + 1
    dt = path.dt
    for lag in range(1, n + 1):
        if lag >= first:
            break
        threshold = (lag * dt / 4.0) ** alpha
        diffs = np.abs(w[lag:first] - w[: first - lag])
        hits = np.flatnonzero(diffs >= threshold)
        if hits.size:
            first = min(first, int(hits[0]) + lag)
    return path.horizon if first > n else first * dt

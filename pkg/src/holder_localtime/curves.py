"""Curves on [0, 1]: piecewise-linear representations, Hölder-ball membership,
the dyadic lattice family and projection onto it, and curve distances.

Every curve here is piecewise linear between its knots.  For such curves and
0 < alpha <= 1 the supremum of |f(s) - f(t)| / |s - t|^alpha over the
continuum is attained at a pair of knots (on each linear piece the map
s -> |f(s) - f(t)| - c|s - t|^alpha is convex), so the grid check below is
exact for the represented function.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .brownian import kernel_integrand_sqrt_time, sqrt_time_nodes

# relative slack for float comparisons against exact lattice/Hölder boundaries
REL_TOL = 1e-12


class Curve:
    """Piecewise-linear function on [0, 1] given by increasing ``knots``."""

    kind = "curve"

    @property
    def knots(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def values(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def resolution(self) -> int:
        return len(self.knots) - 1

    def __call__(self, t):
        return np.interp(t, self.knots, self.values)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def max_slope(self) -> float:
        return float(np.max(np.abs(np.diff(self.values) / np.diff(self.knots))))

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "f"])
            for t, v in zip(self.knots, self.values):
                writer.writerow([repr(float(t)), repr(float(v))])


class PiecewiseLinearCurve(Curve):
    kind = "piecewise"

    def __init__(self, knots, values, alpha: float | None = None):
        knots = np.asarray(knots, dtype=float)
        values = np.asarray(values, dtype=float)
        if knots.shape != values.shape or knots.ndim != 1 or knots.size < 2:
            raise ValueError("knots and values must be matching 1-d arrays of length >= 2")
        if knots[0] != 0.0 or knots[-1] != 1.0 or np.any(np.diff(knots) <= 0):
            raise ValueError("knots must increase strictly from 0 to 1")
        if not np.all(np.isfinite(values)):
            raise ValueError("curve values must be finite")
        self._knots, self._values, self.alpha = knots, values, alpha

    @property
    def knots(self):
        return self._knots

    @property
    def values(self):
        return self._values


class SampledCurve(Curve):
    """Values on the uniform grid j/M, j = 0..M, linear in between."""

    kind = "sampled"

    def __init__(self, values, alpha: float | None = None):
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ValueError("a sampled curve needs at least two values")
        if not np.all(np.isfinite(values)):
            raise ValueError("curve values must be finite")
        self._values = values
        self.alpha = alpha

    @classmethod
    def from_function(cls, fn: Callable[[np.ndarray], np.ndarray], resolution: int, alpha=None):
        t = np.arange(resolution + 1) / resolution
        return cls(np.broadcast_to(np.asarray(fn(t), dtype=float), t.shape).copy(), alpha)

    @classmethod
    def constant(cls, level: float, alpha=None):
        return cls([level, level], alpha)

    @property
    def knots(self):
        return np.arange(self._values.size) / (self._values.size - 1)

    @property
    def values(self):
        return self._values

    def to_json(self) -> dict:
        return {"kind": "sampled", "alpha": self.alpha, "values": self._values.tolist()}


@dataclass(frozen=True)
class DyadicCurve(Curve):
    """Lattice curve: N = 2**n linear pieces of slope +-N^(1-alpha).

    The value at j/N is ``levels[j] / N**alpha`` with integer levels, so
    lattice membership and tie rules are exact.
    """

    n: int
    alpha: float
    start_level: int
    slope_signs: tuple

    kind = "dyadic"

    def __post_init__(self):
        signs = tuple(int(s) for s in self.slope_signs)
        if len(signs) != 2**self.n or any(s not in (1, -1) for s in signs):
            raise ValueError(f"need {2**self.n} slope signs in {{+1, -1}}")
        object.__setattr__(self, "slope_signs", signs)
        object.__setattr__(self, "start_level", int(self.start_level))

    @property
    def N(self) -> int:
        return 2**self.n

    @property
    def scale(self) -> float:
        return lattice_scale(self.n, self.alpha)

    @property
    def levels(self) -> np.ndarray:
        return self.start_level + np.concatenate([[0], np.cumsum(self.slope_signs)])

    @property
    def knots(self):
        return np.arange(self.N + 1) / self.N

    @property
    def values(self):
        return self.levels / self.scale

    @property
    def widened(self) -> bool:
        """True when some value leaves [-1, 1] (allowed up to one lattice step)."""
        return bool(np.max(np.abs(self.levels)) > self.scale * (1 + REL_TOL))

    @classmethod
    def from_levels(cls, n: int, alpha: float, levels) -> "DyadicCurve":
        levels = np.asarray(levels, dtype=np.int64)
        steps = np.diff(levels)
        if np.any(np.abs(steps) != 1):
            raise ValueError("consecutive levels must differ by exactly one")
        return cls(n, alpha, int(levels[0]), tuple(steps.tolist()))

    def to_json(self) -> dict:
        return {
            "kind": "dyadic",
            "n": self.n,
            "alpha": self.alpha,
            "start_level": self.start_level,
            "signs": list(self.slope_signs),
        }


def curve_from_json(obj: dict | str) -> Curve:
    if isinstance(obj, str):
        obj = json.loads(obj)
    if obj["kind"] == "dyadic":
        return DyadicCurve(obj["n"], obj["alpha"], obj["start_level"], tuple(obj["signs"]))
    if obj["kind"] == "sampled":
        return SampledCurve(obj["values"], obj.get("alpha"))
    raise ValueError(f"unknown curve kind {obj['kind']!r}")


def lattice_scale(n: int, alpha: float) -> float:
    """N^alpha for N = 2^n: values on the lattice are integers / N^alpha."""
    return 2.0 ** (n * alpha)


def max_lattice_level(n: int, alpha: float) -> int:
    """Largest |level| whose value stays inside the widened band 1 + 1/N^alpha."""
    return int(math.floor(lattice_scale(n, alpha) + 1 + 1e-9))


@dataclass(frozen=True)
class HolderParams:
    alpha: float
    bound: float = 1.0

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")


@dataclass(frozen=True)
class HolderVerdict:
    member: bool
    sup_norm: float
    ratio: float
    worst_pair: tuple

    def __bool__(self):
        return self.member


def holder_ratios(knots: np.ndarray, values: np.ndarray, alpha: float):
    """Max of |f(s)-f(t)| / |s-t|^alpha over knot pairs, with its arg pair."""
    best, pair = 0.0, (float(knots[0]), float(knots[-1]))
    n = knots.size
    for lag in range(1, n):
        num = np.abs(values[lag:] - values[:-lag])
        ratio = num / (knots[lag:] - knots[:-lag]) ** alpha
        i = int(np.argmax(ratio))
        if ratio[i] > best:
            best, pair = float(ratio[i]), (float(knots[i]), float(knots[i + lag]))
    return best, pair


def holder_check(curve: Curve, params: HolderParams) -> HolderVerdict:
    """Membership of ``curve`` in {sup|f| <= bound, |f(s)-f(t)| <= |s-t|^alpha}."""
    knots, values = curve.knots, curve.values
    sup = float(np.max(np.abs(values)))
    ratio, pair = holder_ratios(knots, values, params.alpha)
    member = sup <= params.bound * (1 + REL_TOL) and ratio <= 1 + REL_TOL
    return HolderVerdict(member, sup, ratio, pair)


def _common_knots(f: Curve, g: Curve) -> np.ndarray:
    return np.union1d(f.knots, g.knots)


def sup_distance(f: Curve, g: Curve) -> float:
    # |f - g| is piecewise linear between the union of knots, so this is exact
    t = _common_knots(f, g)
    return float(np.max(np.abs(f(t) - g(t))))


def dyadic_project(h: Curve, n: int, alpha: float) -> DyadicCurve:
    """Inductive nearest-lattice approximation h^(n) of ``h``.

    Start at the lattice multiple nearest to h(0) (smaller one on ties); on
    each [k/N, (k+1)/N] climb iff h^(n)(k/N) <= h(k/N).  For h in the Hölder
    ball the result stays within 2/N^alpha of h.
    """
    verdict = holder_check(h, HolderParams(alpha))
    if not verdict:
        raise ValueError(
            f"dyadic_project needs h in S_alpha; ratio {verdict.ratio:.6g} at {verdict.worst_pair}, "
            f"sup norm {verdict.sup_norm:.6g}"
        )
    N = 2**n
    scale = lattice_scale(n, alpha)
    target = h(np.arange(N + 1) / N)
    level = int(math.ceil(target[0] * scale - 0.5))
    start = level
    signs = []
    for k in range(N):
        sign = 1 if level / scale <= target[k] else -1
        signs.append(sign)
        level += sign
    return DyadicCurve(n, alpha, start, tuple(signs))


def tn_level_matrix(n: int, alpha: float, cap: int = 1 << 22) -> np.ndarray:
    """All level sequences of T_n as rows of an int array (lexicographic order).

    Candidates are every start level in the widened range times every sign
    pattern; the filter keeps rows whose realized curve lies in the widened
    band and satisfies the Hölder inequality at every pair of grid times.
    """
    N = 2**n
    top = max_lattice_level(n, alpha)
    count = (2 * top + 1) * 2**N
    if count > cap:
        raise ValueError(f"T_{n} enumeration would visit {count} candidates (cap {cap})")
    codes = np.arange(2**N, dtype=np.int64)[:, None]
    patterns = ((codes >> np.arange(N - 1, -1, -1)) & 1) * 2 - 1
    offsets = np.concatenate([np.zeros((len(patterns), 1), np.int64), np.cumsum(patterns, axis=1)], axis=1)
    scale = lattice_scale(n, alpha)
    # Hölder filter on offsets is independent of the start level
    keep = np.ones(len(offsets), dtype=bool)
    for lag in range(1, N + 1):
        diff = np.abs(offsets[:, lag:] - offsets[:, :-lag]) / scale
        keep &= np.all(diff <= (lag / N) ** alpha * (1 + REL_TOL), axis=1)
    offsets = offsets[keep]
    rows = []
    band = scale + 1
    for start in range(-top, top + 1):
        levels = start + offsets
        ok = np.all(np.abs(levels) <= band * (1 + REL_TOL), axis=1)
        rows.append(levels[ok])
    out = np.concatenate(rows) if rows else np.empty((0, N + 1), np.int64)
    order = np.lexsort(out.T[::-1])
    return out[order]


def enumerate_Tn(n: int, alpha: float, cap: int = 1 << 22) -> Iterator[DyadicCurve]:
    for row in tn_level_matrix(n, alpha, cap):
        yield DyadicCurve.from_levels(n, alpha, row)


def random_dyadic_curve(n: int, alpha: float, rng: np.random.Generator, max_tries: int = 10_000) -> DyadicCurve:
    """Uniform start level and sign pattern, redrawn until the curve lies in T_n."""
    N = 2**n
    top = max_lattice_level(n, alpha)
    scale = lattice_scale(n, alpha)
    for _ in range(max_tries):
        start = int(rng.integers(-top, top + 1))
        signs = tuple(int(s) for s in rng.choice([-1, 1], size=N))
        levels = start + np.concatenate([[0], np.cumsum(signs)])
        if np.max(np.abs(levels)) > (scale + 1) * (1 + REL_TOL):
            continue
        ratio, _ = holder_ratios(np.arange(N + 1) / N, levels / scale, alpha)
        if ratio <= 1 + REL_TOL:
            return DyadicCurve(n, alpha, start, signs)
    raise RuntimeError(f"no T_{n} curve found in {max_tries} draws")


def random_holder_curve(alpha: float, rng: np.random.Generator, resolution: int = 1024,
                        octaves: int = 10) -> SampledCurve:
    """A random member of S_alpha sampled on ``resolution`` cells.

    Random-phase lacunary cosine series with amplitudes 2^(-k alpha), sampled
    and then scaled down so that both the sup bound and the Hölder bound hold
    for the piecewise-linear interpolant, times a random factor in [1/2, 1].
    """
    t = np.arange(resolution + 1) / resolution
    v = np.zeros_like(t)
    for k in range(octaves):
        v += 2.0 ** (-k * alpha) * rng.uniform(-1, 1) * np.cos(2 * np.pi * 2**k * t + rng.uniform(0, 2 * np.pi))
    v += rng.uniform(-1, 1)
    ratio, _ = holder_ratios(t, v, alpha)
    bound = max(ratio, float(np.max(np.abs(v))), 1e-300)
    v *= rng.uniform(0.5, 1.0) / bound * (1 - 1e-12)
    return SampledCurve(v, alpha)


def kernel_distance(f: Curve, g: Curve, quad_points: int = 4096) -> float:
    """Numerical value of  int_0^1 |p(t, 0, f(t)) - p(t, 0, g(t))| dt.

    Integrated in u = sqrt(t), where the integrand is bounded; the node set is
    fixed, so symmetry is exact and the triangle inequality holds node-wise.
    """
    if quad_points < 2048:
        raise ValueError("kernel_distance needs quad_points >= 2048")
    u, w = sqrt_time_nodes(1.0, quad_points)
    t = u * u
    a = kernel_integrand_sqrt_time(u, f(t))
    b = kernel_integrand_sqrt_time(u, g(t))
    return float(np.sum(w * np.abs(a - b)))

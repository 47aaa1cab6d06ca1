"""Space-time rectangle censuses of a Brownian path and a curve.

A fine rectangle R(l, m) is the time cell [l/N, (l+1)/N] (closed, as grid
samples on a shared endpoint belong to both neighbours) times the half-open
band [m/N^alpha, (m+1)/N^alpha).  A cell is hit by a graph when one of the
path's grid samples in the time cell lands in the band; sub-grid excursions
are invisible, hence the requirement dt <= 1/(4N).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .brownian import BrownianPath
from .curves import Curve


def _check_resolution(path: BrownianPath, N: int) -> int:
    if N < 1 or N & (N - 1):
        raise ValueError(f"N must be a power of two, got {N}")
    if path.n_steps < 4 * N:
        raise ValueError(f"path step 1/{path.n_steps} too coarse for N={N}: need dt <= 1/(4N)")
    return path.n_steps // N


def band_indicators(path: BrownianPath, a: float, b: float, N: int) -> np.ndarray:
    """I_j for j = 1..N: does W enter the closed band [a, b] during [(j-1)/N, j/N]?"""
    if not a < b <= a + 2 / math.sqrt(N) * (1 + 1e-12):
        raise ValueError(f"band [a, b] must satisfy a < b <= a + 2/sqrt(N); got width {b - a:.4g}")
    r = _check_resolution(path, N)
    inside = (path.values >= a) & (path.values <= b)
    return inside[:-1].reshape(N, r).any(axis=1) | inside[r::r]


def band_hit_count(path: BrownianPath, a: float, b: float, N: int, k: int) -> int:
    if not 1 <= k <= N:
        raise ValueError(f"k must lie in 1..{N}")
    return int(np.count_nonzero(band_indicators(path, a, b, N)[:k]))


@dataclass(frozen=True)
class RectGrid:
    """Fine rectangles at resolution N and the coarse grid at resolution N/K.

    N/K is taken as 2^ceil(n/2) (N = 2^n), which keeps both grids dyadic;
    for even n this is sqrt(N) exactly instead of strictly above it.
    """

    N: int
    alpha: float

    def __post_init__(self):
        if self.N < 2 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two >= 2, got {self.N}")
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")

    @property
    def n(self) -> int:
        return self.N.bit_length() - 1

    @property
    def scale(self) -> float:
        return self.N**self.alpha

    @property
    def coarse_N(self) -> int:
        return 2 ** math.ceil(self.n / 2)

    @property
    def K(self) -> int:
        return self.N // self.coarse_N

    @property
    def band_range(self) -> tuple[int, int]:
        """Lowest and highest band index meeting [-1, 1]."""
        return math.floor(-self.scale), math.floor(self.scale)

    def coarse(self) -> "RectGrid":
        return RectGrid(self.coarse_N, self.alpha)


def hit_matrix(values: np.ndarray, grid: RectGrid) -> np.ndarray:
    """Boolean (N, bands) matrix of rectangles visited by the sampled graph.

    ``values`` are samples on a uniform grid of n_steps + 1 points, with
    n_steps a multiple of N.  Samples outside [-1, 1] are ignored.
    """
    n_steps = values.size - 1
    r = n_steps // grid.N
    lo, hi = grid.band_range
    out = np.zeros((grid.N, hi - lo + 1), dtype=bool)
    idx = np.arange(n_steps + 1)
    keep = np.abs(values) <= 1.0
    band = np.floor(values[keep] * grid.scale).astype(np.int64) - lo
    idx = idx[keep]
    # clamp guards values within rounding of +-1 at integer N^alpha
    band = np.clip(band, 0, hi - lo)
    cell = np.minimum(idx // r, grid.N - 1)
    out[cell, band] = True
    shared = (idx % r == 0) & (idx > 0) & (idx < n_steps)
    out[cell[shared] - 1, band[shared]] = True
    return out


@dataclass
class CensusReport:
    """Rectangle counts for one path/curve pair.

    ``curve_only`` and ``path_only`` count the rectangles visited by each
    graph on its own; ``joint`` those visited by both.  ``band_counts[m]`` is
    the number of time cells in which the path visits band m (A_N of that band).
    """

    N: int
    alpha: float
    joint: int
    curve_only: int
    path_only: int
    band_counts: np.ndarray = field(repr=False)
    joint_cells: np.ndarray = field(repr=False)
    seed: object = None
    curve_id: str | None = None

    def row(self):
        seed = None if self.seed is None else self.seed.stream_index
        return {"seed": seed, "N": self.N, "alpha": self.alpha, "joint": self.joint,
                "curve_only": self.curve_only, "path_only": self.path_only}


def _curve_samples(path: BrownianPath, f: Curve) -> np.ndarray:
    return f(path.times)


def joint_hit_census(path: BrownianPath, f: Curve, N: int, alpha: float, curve_id: str | None = None) -> CensusReport:
    _check_resolution(path, N)
    grid = RectGrid(N, alpha)
    by_path = hit_matrix(path.values, grid)
    by_curve = hit_matrix(_curve_samples(path, f), grid)
    joint = by_path & by_curve
    return CensusReport(
        N, alpha,
        joint=int(joint.sum()),
        curve_only=int(by_curve.sum()),
        path_only=int(by_path.sum()),
        band_counts=by_path.sum(axis=0),
        joint_cells=joint,
        seed=path.seed,
        curve_id=curve_id,
    )


@dataclass
class CoarseCell:
    i: int
    k: int
    fine_joint: int
    coarse_joint: bool
    curve_hit: bool

    def to_json(self):
        return {"i": self.i, "k": self.k, "fine_joint": self.fine_joint}


@dataclass
class CoarseFineReport:
    grid: RectGrid
    cells: list
    total_fine_joint: int
    coarse_curve_cells: int
    coarse_joint_cells: int
    coarse_joint_with_fine: int

    @property
    def max_fine_joint(self) -> int:
        return max((c.fine_joint for c in self.cells), default=0)

    @property
    def refinement_frequency(self) -> float:
        """Share of jointly hit coarse cells holding a jointly hit fine cell (diagnostic)."""
        return self.coarse_joint_with_fine / self.coarse_joint_cells if self.coarse_joint_cells else float("nan")


def coarse_fine_census(path: BrownianPath, f: Curve, N: int, alpha: float) -> CoarseFineReport:
    """Fine joint counts grouped by coarse cell Q(i, k) = R(i, k) at resolution N/K.

    Coarse and fine bands are not nested (K^alpha is not an integer), so each
    fine rectangle is assigned to the coarse cell holding its lower-left
    corner.  With that assignment the per-cell counts add up to the fine joint
    total exactly.
    """
    _check_resolution(path, N)
    grid = RectGrid(N, alpha)
    cgrid = grid.coarse()
    curve_vals = _curve_samples(path, f)
    fine_joint = hit_matrix(path.values, grid) & hit_matrix(curve_vals, grid)
    coarse_path = hit_matrix(path.values, cgrid)
    coarse_curve = hit_matrix(curve_vals, cgrid)
    coarse_joint = coarse_path & coarse_curve

    lo, _ = grid.band_range
    clo, chi = cgrid.band_range
    ell, m = np.nonzero(fine_joint)
    ci = ell // grid.K
    ck = np.floor((m + lo) / grid.scale * cgrid.scale).astype(np.int64)
    ck = np.clip(ck, clo, chi) - clo
    counts = np.zeros(coarse_joint.shape, dtype=np.int64)
    np.add.at(counts, (ci, ck), 1)

    cells = []
    for i, k in zip(*np.nonzero(coarse_joint | (counts > 0))):
        cells.append(CoarseCell(int(i), int(k) + clo, int(counts[i, k]), bool(coarse_joint[i, k]),
                                bool(coarse_curve[i, k])))
    return CoarseFineReport(
        grid,
        cells,
        total_fine_joint=int(counts.sum()),
        coarse_curve_cells=int(coarse_curve.sum()),
        coarse_joint_cells=int(coarse_joint.sum()),
        coarse_joint_with_fine=int(np.count_nonzero(coarse_joint & (counts > 0))),
    )

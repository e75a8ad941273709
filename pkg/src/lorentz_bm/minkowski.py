"""Minkowski model spaces sampled on regular grids.

Axis 0 is time; the remaining ``d`` axes are space.  A grid space has one
point per cell center, reference mass equal to the cell volume, and computes
time separations lazily from coordinates.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .causal import NEG_INF, FiniteCausalSpace

MAX_POINTS = 10**6
_SNAP_EPS = 1e-9


class GridError(ValueError):
    pass


class OutOfDomain(ValueError):
    """A pushed-forward point left the grid box."""


class NotTotallyTimelike(ValueError):
    """Some pair of the product set is not chronologically related."""


def minkowski_ell(p, q):
    """Time separation ``sqrt(dt^2 - |dx|^2)`` for future-directed causal pairs.

    Accepts single points or broadcastable ``(..., D)`` arrays; returns
    ``-inf`` for spacelike or past-directed pairs.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape[-1] != q.shape[-1]:
        raise ValueError(f"dimension mismatch: {p.shape[-1]} vs {q.shape[-1]}")
    d = q - p
    dt = d[..., 0]
    s2 = dt * dt - np.sum(d[..., 1:] ** 2, axis=-1)
    with np.errstate(invalid="ignore"):
        out = np.where((dt >= 0) & (s2 >= 0), np.sqrt(np.maximum(s2, 0.0)), NEG_INF)
    return out if out.ndim else float(out)


def geodesic_point(p, q, t: float) -> np.ndarray:
    """Point at parameter ``t`` on the straight causal segment from p to q."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.any(np.asarray(minkowski_ell(p, q)) < 0):
        raise ValueError("geodesic_point needs a causally related pair")
    return (1.0 - t) * p + t * q


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned box split into ``resolution`` cells per axis."""

    bounds: tuple[tuple[float, float], ...]
    resolution: tuple[int, ...]

    def __init__(self, bounds: Sequence[Sequence[float]], resolution: int | Sequence[int]):
        b = tuple((float(lo), float(hi)) for lo, hi in bounds)
        if len(b) < 2:
            raise GridError("need a time axis and at least one space axis")
        if isinstance(resolution, (int, np.integer)):
            r = (int(resolution),) * len(b)
        else:
            r = tuple(int(x) for x in resolution)
        if len(r) != len(b):
            raise GridError(f"resolution has {len(r)} axes, bounds have {len(b)}")
        for axis, (lo, hi) in enumerate(b):
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
                raise GridError(f"axis {axis}: need finite lo < hi, got [{lo}, {hi}]")
        if any(x < 1 for x in r):
            raise GridError("resolution must be >= 1 on every axis")
        if math.prod(r) > MAX_POINTS:
            raise GridError(f"grid has {math.prod(r)} cells, cap is {MAX_POINTS}")
        object.__setattr__(self, "bounds", b)
        object.__setattr__(self, "resolution", r)

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def lo(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.bounds])

    @property
    def hi(self) -> np.ndarray:
        return np.array([hi for _, hi in self.bounds])

    @property
    def edges(self) -> np.ndarray:
        return (self.hi - self.lo) / np.array(self.resolution)

    @property
    def h(self) -> float:
        """Discretization scale: the largest cell edge."""
        return float(self.edges.max())

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.edges))

    @property
    def n_cells(self) -> int:
        return math.prod(self.resolution)

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.bounds, tuple(r * factor for r in self.resolution))

    def centers(self) -> np.ndarray:
        axes = [lo + (np.arange(r) + 0.5) * e for (lo, _), r, e in zip(self.bounds, self.resolution, self.edges)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def multi_index(self, points: np.ndarray) -> np.ndarray:
        """Containing-cell integer coordinates (floor), shape ``(m, D)``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        u = (pts - self.lo) / self.edges
        cells = np.floor(u + _SNAP_EPS).astype(np.int64)
        res = np.array(self.resolution)
        # a point sitting exactly on the upper face belongs to the last cell
        on_top = (cells == res) & (u <= res + _SNAP_EPS)
        cells = np.where(on_top, res - 1, cells)
        if np.any(cells < 0) or np.any(cells >= res):
            raise OutOfDomain("point outside the grid bounds")
        return cells

    def locate(self, points: np.ndarray) -> np.ndarray:
        """Flat index of the cell containing each point."""
        cells = self.multi_index(points)
        return np.ravel_multi_index(tuple(cells.T), self.resolution)

    def box_cells(self, box: Sequence[Sequence[float]]) -> np.ndarray:
        """Indices of cells whose centers lie in the closed coordinate box."""
        c = self.centers()
        lo = np.array([a for a, _ in box], dtype=float)
        hi = np.array([b for _, b in box], dtype=float)
        inside = np.all((c >= lo - 1e-12) & (c <= hi + 1e-12), axis=1)
        return np.flatnonzero(inside)

    def block_cells(self, start: Sequence[int], shape: Sequence[int]) -> np.ndarray:
        """Indices of the cell block ``start + [0, shape)`` in integer grid units."""
        ranges = [np.arange(s, s + w) for s, w in zip(start, shape)]
        for r, res in zip(ranges, self.resolution):
            if r.size == 0 or r[0] < 0 or r[-1] >= res:
                raise OutOfDomain("cell block leaves the grid")
        mesh = np.meshgrid(*ranges, indexing="ij")
        return np.sort(np.ravel_multi_index(tuple(m.ravel() for m in mesh), self.resolution))

    def to_json(self) -> dict:
        return {"bounds": [list(b) for b in self.bounds], "resolution": list(self.resolution)}

    @classmethod
    def from_json(cls, doc: dict) -> "GridSpec":
        extra = set(doc) - {"bounds", "resolution"}
        if extra:
            raise GridError(f"unknown grid fields {sorted(extra)}")
        try:
            return cls(doc["bounds"], doc["resolution"])
        except KeyError as exc:
            raise GridError(f"grid spec missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, GridError):
                raise
            raise GridError(f"malformed grid spec: {exc}") from None


def grid_sample(spec: GridSpec) -> FiniteCausalSpace:
    """Cell-center sample of the grid box with cell-volume weights."""
    centers = spec.centers()
    n = centers.shape[0]
    return FiniteCausalSpace(
        np.full(n, spec.cell_volume),
        coords=centers,
        separation=minkowski_ell,
        grid=spec,
        model="minkowski",
        labels=[",".join(f"{c:g}" for c in row) for row in centers],
    )


def point_space(points: np.ndarray, ref_mass: Sequence[float] | float = 1.0, grid: GridSpec | None = None) -> FiniteCausalSpace:
    """Minkowski space on an arbitrary point cloud (dense separation)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = pts.shape[0]
    mass = np.broadcast_to(np.asarray(ref_mass, dtype=float), (n,))
    ell = minkowski_ell(pts[:, None, :], pts[None, :, :])
    # exact reflexivity; the diagonal is 0 by construction but guard rounding
    np.fill_diagonal(ell, 0.0)
    return FiniteCausalSpace(mass, ell, coords=pts, separation=minkowski_ell, grid=grid, model="minkowski")


def _as_index_array(S: Iterable[int]) -> np.ndarray:
    return np.unique(np.asarray(list(S) if not isinstance(S, np.ndarray) else S, dtype=np.intp))


@dataclass(frozen=True)
class MidpointSet:
    indices: np.ndarray
    mass: float
    empty: bool

    def __len__(self) -> int:
        return int(self.indices.size)


def midpoint_set(space: FiniteCausalSpace, A: Iterable[int], B: Iterable[int], t: float, grid: GridSpec | None = None, chunk: int = 1 << 20) -> MidpointSet:
    """Snapped ``G_t(A, B)``: cells hit by t-points of chronological pairs."""
    grid = grid or space.grid
    if grid is None or space.coords is None:
        raise ValueError("midpoint_set needs a grid space with coordinates")
    A = _as_index_array(A)
    B = _as_index_array(B)
    if A.size == 0 or B.size == 0:
        raise ValueError("midpoint_set needs nonempty A and B")
    hits: list[np.ndarray] = []
    rows_per = max(1, chunk // B.size)
    for start in range(0, A.size, rows_per):
        a = A[start:start + rows_per]
        ell = space.sep(a, B)
        ia, ib = np.nonzero(ell > 0)
        if ia.size == 0:
            continue
        pts = (1.0 - t) * space.coords[a[ia]] + t * space.coords[B[ib]]
        hits.append(np.unique(grid.locate(pts)))
    if not hits:
        return MidpointSet(np.empty(0, dtype=np.intp), 0.0, True)
    idx = np.unique(np.concatenate(hits))
    return MidpointSet(idx, float(space.ref_mass[idx].sum()), False)


class ThetaMode(enum.Enum):
    INF = "Inf"
    SUP = "Sup"


@dataclass(frozen=True)
class ThetaValue:
    value: float
    mode: ThetaMode

    def __float__(self) -> float:
        return self.value


def theta(space: FiniteCausalSpace, A: Iterable[int], B: Iterable[int], K: float) -> ThetaValue:
    """Extreme separation over ``A x B``: inf when ``K >= 0``, sup otherwise."""
    A = _as_index_array(A)
    B = _as_index_array(B)
    ell = space.sep(A, B)
    if ell.size == 0 or np.any(~(ell > 0)):
        raise NotTotallyTimelike("theta needs every pair of A x B chronologically related")
    if K >= 0:
        return ThetaValue(float(ell.min()), ThetaMode.INF)
    return ThetaValue(float(ell.max()), ThetaMode.SUP)


def is_totally_timelike(space: FiniteCausalSpace, A: Iterable[int], B: Iterable[int]) -> bool:
    ell = space.sep(_as_index_array(A), _as_index_array(B))
    return bool(ell.size) and bool(np.all(ell > 0))

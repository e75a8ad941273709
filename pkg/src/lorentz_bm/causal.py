"""Finite causal spaces.

A finite causal space is a point set with a time separation ``ell`` taking
values in ``{-inf} ∪ [0, inf)``.  ``-inf`` marks causally unrelated pairs and
plays the absorbing role in sums: ``-inf + a == -inf``.  Plain IEEE floats
already obey that rule, so time values are stored as ``float64`` with
``NEG_INF = -inf`` as the sentinel.

Large model spaces (fine grids) never materialize the dense ``n x n`` matrix;
they carry coordinates plus a separation function and compute blocks on
demand through :meth:`FiniteCausalSpace.sep`.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .report import VerificationReport

NEG_INF = -math.inf

#: Spaces up to this size get a full reverse-triangle audit on construction.
AUDIT_LIMIT = 400
#: Refuse to materialize dense separation matrices beyond this many points.
DENSE_LIMIT = 8192


class CausalError(ValueError):
    """Raised for malformed spaces and paths."""


class Relation(enum.Enum):
    CHRONOLOGICAL = "Chronological"
    NULL_CAUSAL = "NullCausal"
    UNRELATED = "Unrelated"


def lift_power(values, p: float):
    """``values**p`` with ``(-inf)**p = -inf``."""
    v = np.asarray(values, dtype=float)
    with np.errstate(invalid="ignore"):
        out = np.where(v == NEG_INF, NEG_INF, np.abs(v) ** p)
    return out if out.ndim else float(out)


def default_tol(ell: np.ndarray) -> float:
    finite = ell[np.isfinite(ell)]
    scale = float(finite.max()) if finite.size else 0.0
    return 1e-9 * max(scale, 1.0)


class FiniteCausalSpace:
    """Points, time separation and reference-measure weights.

    Either ``ell`` (dense matrix) or ``coords`` plus ``separation`` (a
    vectorized function of two coordinate arrays) must be given.
    """

    def __init__(
        self,
        ref_mass: Sequence[float],
        ell: np.ndarray | None = None,
        *,
        coords: np.ndarray | None = None,
        separation: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
        labels: Sequence[str] | None = None,
        grid=None,
        model: str | None = None,
        validate: bool | None = None,
        tol: float | None = None,
    ):
        self.ref_mass = np.asarray(ref_mass, dtype=float).copy()
        self.ref_mass.setflags(write=False)
        n = self.ref_mass.size
        if self.ref_mass.ndim != 1 or n == 0:
            raise CausalError("ref_mass must be a nonempty vector")
        if not np.all(self.ref_mass > 0) or not np.all(np.isfinite(self.ref_mass)):
            raise CausalError("reference masses must be finite and strictly positive")

        if ell is None and (coords is None or separation is None):
            raise CausalError("need either a dense ell matrix or coords with a separation function")
        self._ell = None
        if ell is not None:
            m = np.array(ell, dtype=float)
            if m.shape != (n, n):
                raise CausalError(f"ell has shape {m.shape}, expected {(n, n)}")
            if np.any(np.isnan(m)) or np.any(m == math.inf):
                raise CausalError("ell entries must be -inf or finite")
            if np.any((m < 0) & (m != NEG_INF)):
                raise CausalError("finite ell entries must be nonnegative")
            m.setflags(write=False)
            self._ell = m
        self.coords = None if coords is None else np.asarray(coords, dtype=float)
        if self.coords is not None:
            if self.coords.ndim != 2 or self.coords.shape[0] != n:
                raise CausalError("coords must be an (n, D) array")
            self.coords.setflags(write=False)
        self.separation = separation
        self.model = model
        self.grid = grid
        self.labels = tuple(labels) if labels is not None else tuple(str(i) for i in range(n))
        if len(self.labels) != n:
            raise CausalError("labels length does not match point count")

        diag = self.sep_pairs(np.arange(n), np.arange(n))
        if np.any(diag < 0):
            bad = int(np.flatnonzero(diag < 0)[0])
            raise CausalError(f"causal reflexivity fails at point {bad}")

        if validate is None:
            validate = n <= AUDIT_LIMIT
        if validate:
            rep = check_reverse_triangle(self, tol)
            if not rep.passed:
                raise CausalError(
                    f"reverse triangle inequality fails on {rep.n_violations} triples, "
                    f"first {rep.violations[0]}"
                )

    # -- separation access -------------------------------------------------

    @property
    def n(self) -> int:
        return self.ref_mass.size

    def sep(self, rows, cols) -> np.ndarray:
        """Block ``ell[rows][:, cols]``."""
        rows = np.atleast_1d(np.asarray(rows, dtype=np.intp))
        cols = np.atleast_1d(np.asarray(cols, dtype=np.intp))
        if self._ell is not None:
            return self._ell[np.ix_(rows, cols)]
        return self.separation(self.coords[rows][:, None, :], self.coords[cols][None, :, :])

    def sep_pairs(self, i, j) -> np.ndarray:
        """Elementwise ``ell[i_k, j_k]``."""
        i = np.asarray(i, dtype=np.intp)
        j = np.asarray(j, dtype=np.intp)
        if self._ell is not None:
            return self._ell[i, j]
        return self.separation(self.coords[i], self.coords[j])

    def __getitem__(self, ij) -> float:
        i, j = ij
        self._check_index(i)
        self._check_index(j)
        return float(self.sep_pairs(i, j))

    @property
    def ell(self) -> np.ndarray:
        """Dense separation matrix (materialized on first use)."""
        if self._ell is None:
            if self.n > DENSE_LIMIT:
                raise CausalError(f"refusing to materialize a dense {self.n}x{self.n} matrix")
            m = self.sep(np.arange(self.n), np.arange(self.n))
            m.setflags(write=False)
            self._ell = m
        return self._ell

    def _check_index(self, i) -> None:
        if not (0 <= int(i) < self.n):
            raise IndexError(f"point index {i} out of range for a {self.n}-point space")

    def mass(self, idx) -> float:
        """Reference measure of an index set."""
        if not isinstance(idx, np.ndarray):
            idx = np.fromiter(idx, dtype=np.intp)
        return float(self.ref_mass[np.unique(idx.astype(np.intp))].sum())

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict:
        ell = self.ell
        doc = {
            "n": self.n,
            "ell": [["-inf" if v == NEG_INF else float(v) for v in row] for row in ell],
            "ref_mass": [float(m) for m in self.ref_mass],
            "labels": list(self.labels),
        }
        if self.coords is not None:
            doc["coords"] = self.coords.tolist()
        if self.model is not None:
            doc["model"] = self.model
        if self.grid is not None:
            doc["grid"] = self.grid.to_json()
        return doc

    @classmethod
    def from_json(cls, doc: dict, validate: bool | None = None) -> "FiniteCausalSpace":
        known = {"n", "ell", "ref_mass", "labels", "coords", "model", "grid"}
        extra = set(doc) - known
        if extra:
            raise CausalError(f"unknown fields in space document: {sorted(extra)}")
        for key in ("n", "ell", "ref_mass"):
            if key not in doc:
                raise CausalError(f"space document missing field {key!r}")
        n = int(doc["n"])

        def parse(v):
            if isinstance(v, str):
                if v.strip().lower() in ("-inf", "-infinity"):
                    return NEG_INF
                raise CausalError(f"bad time value {v!r}")
            return float(v)

        ell = np.array([[parse(v) for v in row] for row in doc["ell"]], dtype=float)
        if ell.shape != (n, n):
            raise CausalError(f"ell has shape {ell.shape}, n = {n}")
        grid = None
        if "grid" in doc:
            from .minkowski import GridSpec
            grid = GridSpec.from_json(doc["grid"])
        coords = np.array(doc["coords"], dtype=float) if "coords" in doc else None
        separation = None
        if doc.get("model") == "minkowski":
            from .minkowski import minkowski_ell
            separation = minkowski_ell
        return cls(
            doc["ref_mass"], ell, coords=coords, separation=separation,
            labels=doc.get("labels"), grid=grid, model=doc.get("model"), validate=validate,
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path: str | Path) -> "FiniteCausalSpace":
        return cls.from_json(json.loads(Path(path).read_text()))

    def __repr__(self) -> str:
        kind = "dense" if self._ell is not None else "lazy"
        return f"FiniteCausalSpace(n={self.n}, {kind}, model={self.model!r})"


@dataclass(frozen=True)
class DiscretePath:
    """Ordered sample of a path: point indices at strictly increasing params."""

    points: tuple[int, ...]
    params: tuple[float, ...]

    def __post_init__(self):
        if len(self.points) != len(self.params) or len(self.points) < 1:
            raise CausalError("points and params must be nonempty and of equal length")
        p = self.params
        if len(p) == 1:
            return
        if p[0] != 0.0 or p[-1] != 1.0:
            raise CausalError("params must start at 0 and end at 1")
        if any(b <= a for a, b in zip(p, p[1:])):
            raise CausalError("params must be strictly increasing")

    @classmethod
    def uniform(cls, points: Iterable[int]) -> "DiscretePath":
        pts = tuple(int(p) for p in points)
        k = len(pts)
        params = (0.0,) if k == 1 else tuple(i / (k - 1) for i in range(k))
        return cls(pts, params)

    def concat(self, other: "DiscretePath") -> "DiscretePath":
        """Concatenation at half time; endpoints must agree."""
        if self.points[-1] != other.points[0]:
            raise CausalError("paths do not share an endpoint")
        pts = self.points + other.points[1:]
        params = tuple(0.5 * s for s in self.params) + tuple(0.5 + 0.5 * s for s in other.params[1:])
        return DiscretePath(pts, params)

    def reparametrize(self, phi: Callable[[float], float]) -> "DiscretePath":
        return DiscretePath(self.points, tuple(float(phi(s)) for s in self.params))


# -- operations ---------------------------------------------------------------


def causal_relation(space: FiniteCausalSpace, i: int, j: int) -> Relation:
    v = space[i, j]
    if v > 0:
        return Relation.CHRONOLOGICAL
    if v == 0:
        return Relation.NULL_CAUSAL
    return Relation.UNRELATED


def check_reverse_triangle(space: FiniteCausalSpace, tol: float | None = None, cap: int = 100) -> VerificationReport:
    """Report every triple with ``ell[i,k] + tol < ell[i,j] + ell[j,k]``."""
    ell = space.ell
    if tol is None:
        tol = default_tol(ell)
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    report = VerificationReport("reverse_triangle", cap=cap)
    n = space.n
    with np.errstate(invalid="ignore"):
        for j in range(n):
            through = ell[:, j][:, None] + ell[j, :][None, :]
            bad = ell + tol < through
            if bad.any():
                ii, kk = np.nonzero(bad)
                report.n_violations += ii.size
                room = cap - len(report.violations)
                for i, k in zip(ii[:room], kk[:room]):
                    report.violations.append((int(i), j, int(k)))
    # order witnesses canonically so reports are stable
    report.violations.sort()
    report.info["tol"] = tol
    return report


def _require_causal(space: FiniteCausalSpace, path: DiscretePath) -> np.ndarray:
    pts = np.asarray(path.points, dtype=np.intp)
    for p in pts:
        space._check_index(p)
    block = space.sep(pts, pts)
    upper = np.triu(np.ones_like(block, dtype=bool))
    if np.any(block[upper] < 0):
        raise CausalError("path is not causal")
    return block


def age(space: FiniteCausalSpace, path: DiscretePath) -> float:
    """Sum of consecutive separations along the sampled path.

    For a fixed finite sample the infimum over sub-partitions is attained at
    the finest one, because merging two steps can only increase the sum.
    """
    block = _require_causal(space, path)
    k = len(path.points)
    if k == 1:
        return 0.0
    return float(sum(block[a, a + 1] for a in range(k - 1)))


def is_geodesic_samples(space: FiniteCausalSpace, path: DiscretePath, tol: float = 1e-9) -> bool:
    block = _require_causal(space, path)
    p = np.asarray(path.params)
    total = block[0, -1]
    expected = (p[None, :] - p[:, None]) * total
    upper = np.triu(np.ones_like(block, dtype=bool))
    return bool(np.all(np.abs(block - expected)[upper] <= tol))


def emerald(space: FiniteCausalSpace, A: Iterable[int], B: Iterable[int]) -> np.ndarray:
    """``J(A, B)``: indices causally after some ``a`` and before some ``b``."""
    A = np.asarray(sorted(set(int(a) for a in A)), dtype=np.intp)
    B = np.asarray(sorted(set(int(b) for b in B)), dtype=np.intp)
    if A.size == 0 or B.size == 0:
        raise ValueError("emerald needs nonempty A and B")
    everything = np.arange(space.n)
    after = np.zeros(space.n, dtype=bool)
    before = np.zeros(space.n, dtype=bool)
    # chunk over A and B to keep blocks small on large lazy spaces
    for chunk in np.array_split(A, max(1, A.size // 256)):
        after |= (space.sep(chunk, everything) >= 0).any(axis=0)
    for chunk in np.array_split(B, max(1, B.size // 256)):
        before |= (space.sep(everything, chunk) >= 0).any(axis=1)
    return np.flatnonzero(after & before)

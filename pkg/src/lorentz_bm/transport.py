"""Exact q-Eckstein-Miller transport between discrete measures.

``ell_q(mu, nu) = sup_pi (sum pi_ab ell(a, b)**q)**(1/q)`` over couplings of
``mu`` and ``nu``.  Pairs with ``ell = -inf`` are not given a large negative
cost; they are removed from the bipartite support graph, so an instance with
no causal coupling is detected as LP infeasibility and reported as ``-inf``.

The transportation LP is solved with the HiGHS dual simplex.  Every feasible
solve carries dual potentials ``(u, v)`` and the residuals of dual
feasibility and complementary slackness, which together certify optimality
independently of the solver.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .causal import NEG_INF, FiniteCausalSpace, lift_power
from .measures import DiscreteMeasure, SimpleDecomposition, uniform_measure
from .minkowski import GridSpec, OutOfDomain
from .report import CheckRow, VerificationReport

CERT_TOL = 1e-8
MASS_EPS = 1e-14
EXHAUSTIVE_LIMIT = 8
_HIGHS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
    "presolve": True,
}


class TransportError(ValueError):
    pass


class NotAMap(TransportError):
    """A source cell splits its mass over several targets."""


class NotTimelike(TransportError):
    pass


@dataclass
class Coupling:
    """Transport matrix between the supports of two measures.

    ``pi[r, c]`` is the mass moved from ``rows[r]`` to ``cols[c]``.
    ``objective`` is ``sum pi * ell**q`` (``-inf`` if mass sits on an
    unrelated pair or if no causal coupling exists).
    """

    rows: np.ndarray
    cols: np.ndarray
    pi: np.ndarray
    ell: np.ndarray
    q: float
    objective: float
    feasible: bool = True
    u: np.ndarray | None = None
    v: np.ndarray | None = None
    dual_residual: float = math.nan
    slackness_residual: float = math.nan
    duality_gap: float = math.nan

    @property
    def row_weights(self) -> np.ndarray:
        return self.pi.sum(axis=1)

    @property
    def col_weights(self) -> np.ndarray:
        return self.pi.sum(axis=0)

    @property
    def massed(self) -> np.ndarray:
        return self.pi > MASS_EPS

    def pairs(self) -> list[tuple[int, int]]:
        r, c = np.nonzero(self.massed)
        return [(int(self.rows[i]), int(self.cols[j])) for i, j in zip(r, c)]

    @property
    def certified(self) -> bool:
        return (
            self.feasible
            and self.u is not None
            and self.dual_residual < CERT_TOL
            and self.slackness_residual < CERT_TOL
        )

    def is_timelike(self) -> bool:
        return bool(np.all(self.ell[self.massed] > 0))

    def is_causal(self) -> bool:
        return bool(np.all(self.ell[self.massed] >= 0))

    @property
    def lq(self) -> float:
        if not self.feasible or self.objective == NEG_INF:
            return NEG_INF
        return float(max(self.objective, 0.0) ** (1.0 / self.q))

    def entries(self) -> list[list]:
        r, c = np.nonzero(self.massed)
        return [[int(self.rows[i]), int(self.cols[j]), float(self.pi[i, j])] for i, j in zip(r, c)]

    def to_json(self) -> dict:
        doc = {"entries": self.entries(), "q": self.q, "feasible": self.feasible}
        if self.u is not None:
            doc["certificate"] = {
                "rows": [int(x) for x in self.rows],
                "cols": [int(x) for x in self.cols],
                "u": [float(x) for x in self.u],
                "v": [float(x) for x in self.v],
                "dual_residual": self.dual_residual,
                "slackness_residual": self.slackness_residual,
            }
        return doc


def _objective(pi: np.ndarray, ell: np.ndarray, q: float) -> float:
    mass = pi > MASS_EPS
    if np.any(ell[mass] < 0):
        return NEG_INF
    return float(np.sum(pi[mass] * ell[mass] ** q))


def _certificate(pi, cost, allowed, u, v, a, b) -> tuple[float, float, float]:
    reduced = cost - u[:, None] - v[None, :]
    dual = float(np.max(reduced[allowed], initial=0.0))
    slack = float(np.sum(pi[allowed] * np.abs(reduced[allowed])))
    gap = float(abs(a @ u + b @ v - np.sum(pi[allowed] * cost[allowed])))
    return max(dual, 0.0), slack, gap


def _arc_matrices(m: int, n: int, ai: np.ndarray, aj: np.ndarray):
    k = ai.size
    data = np.ones(2 * k)
    rows = np.concatenate([ai, m + aj])
    cols = np.concatenate([np.arange(k), np.arange(k)])
    return sp.csr_matrix((data, (rows, cols)), shape=(m + n, k))


def _solve_transport(a, b, cost, allowed):
    """Maximize ``sum cost*x`` on allowed arcs; returns (status, x matrix, u, v)."""
    m, n = cost.shape
    ai, aj = np.nonzero(allowed)
    if ai.size == 0:
        return 2, None, None, None
    A = _arc_matrices(m, n, ai, aj)
    res = linprog(
        -cost[ai, aj], A_eq=A, b_eq=np.concatenate([a, b]),
        bounds=(0, None), method="highs-ds", options=_HIGHS,
    )
    if res.status == 2:
        return 2, None, None, None
    if res.status != 0:
        raise TransportError(f"transport LP failed: {res.message}")
    x = np.zeros((m, n))
    x[ai, aj] = np.where(res.x > MASS_EPS, res.x, 0.0)
    duals = -np.asarray(res.eqlin.marginals)
    return 0, x, duals[:m], duals[m:]


def _max_allowed_mass(a, b, allowed) -> np.ndarray:
    """Largest sub-coupling supported on allowed arcs (witness of infeasibility)."""
    m, n = allowed.shape
    ai, aj = np.nonzero(allowed)
    x = np.zeros((m, n))
    if ai.size == 0:
        return x
    A = _arc_matrices(m, n, ai, aj)
    res = linprog(
        -np.ones(ai.size), A_ub=A, b_ub=np.concatenate([a, b]),
        bounds=(0, None), method="highs-ds", options=_HIGHS,
    )
    if res.status != 0:
        raise TransportError(f"max-mass LP failed: {res.message}")
    x[ai, aj] = np.where(res.x > MASS_EPS, res.x, 0.0)
    return x


def _check_q(q: float) -> None:
    if not 0 < q < 1:
        raise ValueError(f"q must lie in (0, 1), got {q}")


def _marginals(mu: DiscreteMeasure, nu: DiscreteMeasure):
    if mu.space is not nu.space:
        raise TransportError("measures live on different spaces")
    rows, cols = mu.support, nu.support
    a, b = mu.weights[rows], nu.weights[cols]
    if abs(a.sum() - b.sum()) > 1e-9:
        raise TransportError("marginal masses differ")
    return rows, cols, a, b


def solve_lq(mu: DiscreteMeasure, nu: DiscreteMeasure, q: float) -> tuple[float, Coupling]:
    """Exact ``ell_q(mu, nu)`` and an optimal coupling with dual certificate."""
    _check_q(q)
    rows, cols, a, b = _marginals(mu, nu)
    ell = mu.space.sep(rows, cols)
    allowed = ell >= 0
    cost = np.where(allowed, lift_power(ell, q), 0.0)

    status, x, u, v = _solve_transport(a, b, cost, allowed)
    if status == 2:
        witness = _max_allowed_mass(a, b, allowed)
        c = Coupling(rows, cols, witness, ell, q, NEG_INF, feasible=False)
        return NEG_INF, c
    dual, slack, gap = _certificate(x, cost, allowed, u, v, a, b)
    c = Coupling(rows, cols, x, ell, q, _objective(x, ell, q), True, u, v, dual, slack, gap)
    return c.lq, c


def lq(mu: DiscreteMeasure, nu: DiscreteMeasure, q: float) -> float:
    return solve_lq(mu, nu, q)[0]


def brute_force_lq(ell: np.ndarray, q: float) -> tuple[float, tuple[int, ...] | None]:
    """Best permutation coupling for equal-weight marginals on a ``k x k`` block.

    Birkhoff: the optimum of the equal-weight transport LP sits at a
    permutation matrix, so enumerating ``k!`` permutations is exact.
    """
    ell = np.asarray(ell, dtype=float)
    k = ell.shape[0]
    if ell.shape != (k, k):
        raise ValueError("brute force needs a square block")
    best, arg = NEG_INF, None
    for perm in itertools.permutations(range(k)):
        vals = ell[np.arange(k), perm]
        if np.any(vals < 0):
            continue
        s = float(np.sum(vals ** q)) / k
        if s > best:
            best, arg = s, perm
    if arg is None:
        return NEG_INF, None
    return best ** (1.0 / q), arg


# -- cyclical monotonicity ----------------------------------------------------


@dataclass(frozen=True)
class MonotonicityResult:
    ok: bool
    subset: tuple[int, ...] | None = None
    sigma: tuple[int, ...] | None = None
    gain: float = 0.0

    def __bool__(self) -> bool:
        return self.ok


def is_cyclically_monotone(
    space: FiniteCausalSpace,
    pairs: Sequence[tuple[int, int]],
    q: float,
    mode: str = "exhaustive",
    k: int = 1000,
    seed: int = 0,
    tol: float = 1e-12,
) -> MonotonicityResult:
    """Check ``sum c(x_i, y_i) >= sum c(x_i, y_sigma(i))`` with ``c = ell**q``.

    ``subset`` in a failing result lists positions in ``pairs``; ``sigma``
    maps the i-th of them to the target of the ``sigma[i]``-th.
    """
    m = len(pairs)
    if m <= 1:
        return MonotonicityResult(True)
    xs = np.array([p[0] for p in pairs], dtype=np.intp)
    ys = np.array([p[1] for p in pairs], dtype=np.intp)
    C = lift_power(space.sep(xs, ys), q)
    scale = tol * max(1.0, float(np.max(np.abs(C[np.isfinite(C)]), initial=0.0)) * m)

    if mode == "exhaustive":
        if m > EXHAUSTIVE_LIMIT:
            raise ValueError(f"exhaustive check limited to {EXHAUSTIVE_LIMIT} pairs, got {m}")
        perms = np.array(list(itertools.permutations(range(m))), dtype=np.intp)
        base = float(np.trace(C))
        sums = C[np.arange(m)[None, :], perms].sum(axis=1)
        with np.errstate(invalid="ignore"):
            bad = base + scale < sums
        if not bad.any():
            return MonotonicityResult(True)
        worst = int(np.argmax(np.where(bad, sums, NEG_INF)))
        perm = perms[worst]
        moved = tuple(int(i) for i in np.flatnonzero(perm != np.arange(m)))
        pos = {i: r for r, i in enumerate(moved)}
        sigma = tuple(pos[int(perm[i])] for i in moved)
        return MonotonicityResult(False, moved, sigma, float(sums[worst] - base))

    if mode == "sampled":
        rng = np.random.default_rng(seed)
        for _ in range(k):
            s = int(rng.integers(2, min(m, EXHAUSTIVE_LIMIT) + 1))
            sub = np.sort(rng.choice(m, size=s, replace=False))
            sig = rng.permutation(s)
            base = float(C[sub, sub].sum())
            alt = float(C[sub, sub[sig]].sum())
            if base + scale < alt:
                return MonotonicityResult(False, tuple(int(i) for i in sub), tuple(int(i) for i in sig), alt - base)
        return MonotonicityResult(True)
    raise ValueError(f"unknown mode {mode!r}")


# -- chronology of measure pairs ---------------------------------------------


class ChronologyClass(enum.IntEnum):
    """Ordered from weakest to strongest."""

    ACAUSAL = 0
    CAUSAL = 1
    Q_TIMELIKE = 2
    STRICTLY_Q_TIMELIKE = 3
    TOTALLY_TIMELIKE = 4


def _face_null_mass(a, b, cost, allowed, null, opt, slack) -> float:
    """Max mass on null arcs over couplings within ``slack`` of the optimum."""
    m, n = cost.shape
    ai, aj = np.nonzero(allowed)
    A = _arc_matrices(m, n, ai, aj)
    res = linprog(
        -null[ai, aj].astype(float), A_eq=A, b_eq=np.concatenate([a, b]),
        A_ub=-cost[ai, aj][None, :], b_ub=[-(opt - slack)],
        bounds=(0, None), method="highs-ds", options=_HIGHS,
    )
    if res.status != 0:
        raise TransportError(f"optimal-face LP failed: {res.message}")
    return float(-res.fun)


def classify_pair(mu: DiscreteMeasure, nu: DiscreteMeasure, q: float, rel_tol: float = 1e-9) -> ChronologyClass:
    """Strongest chronology notion the pair satisfies.

    q-timelike: some optimal coupling lives on ``ell > 0`` (checked by
    re-solving with null arcs removed and comparing optima).  Strictly
    q-timelike: no optimal coupling puts mass on a null arc (checked by
    maximizing null mass over the optimal face).
    """
    _check_q(q)
    rows, cols, a, b = _marginals(mu, nu)
    ell = mu.space.sep(rows, cols)
    if np.all(ell > 0):
        return ChronologyClass.TOTALLY_TIMELIKE
    value, coupling = solve_lq(mu, nu, q)
    if value == NEG_INF:
        return ChronologyClass.ACAUSAL
    opt = coupling.objective
    slack = rel_tol * max(1.0, abs(opt))
    allowed = ell >= 0
    cost = np.where(allowed, lift_power(ell, q), 0.0)
    status, x, _, _ = _solve_transport(a, b, cost, ell > 0)
    if status != 0 or float(np.sum(x * cost)) < opt - slack:
        return ChronologyClass.CAUSAL
    null = allowed & (ell == 0)
    if not null.any() or _face_null_mass(a, b, cost, allowed, null, opt, slack) <= 1e3 * slack:
        return ChronologyClass.STRICTLY_Q_TIMELIKE
    return ChronologyClass.Q_TIMELIKE


# -- restriction, plans, interpolation ---------------------------------------


def restrict_coupling(coupling: Coupling, f: np.ndarray) -> Coupling:
    """``f * pi`` renormalized; dual potentials remain a valid certificate."""
    f = np.asarray(f, dtype=float)
    if f.shape != coupling.pi.shape:
        raise ValueError("f must have the shape of the coupling matrix")
    if np.any(f < 0):
        raise ValueError("f must be nonnegative")
    w = f * coupling.pi
    total = w.sum()
    if total <= 0:
        raise TransportError("restriction has zero total mass")
    w = w / total
    keep_r = np.flatnonzero(w.sum(axis=1) > MASS_EPS)
    keep_c = np.flatnonzero(w.sum(axis=0) > MASS_EPS)
    pi = w[np.ix_(keep_r, keep_c)]
    ell = coupling.ell[np.ix_(keep_r, keep_c)]
    out = Coupling(
        coupling.rows[keep_r], coupling.cols[keep_c], pi, ell, coupling.q,
        _objective(pi, ell, coupling.q), coupling.feasible,
    )
    if coupling.u is not None:
        u, v = coupling.u[keep_r], coupling.v[keep_c]
        allowed = ell >= 0
        cost = np.where(allowed, lift_power(ell, coupling.q), 0.0)
        d, s, g = _certificate(pi, cost, allowed, u, v, pi.sum(1), pi.sum(0))
        out = replace(out, u=u, v=v, dual_residual=d, slackness_residual=s, duality_gap=g)
    return out


def marginal_measures(coupling: Coupling, space: FiniteCausalSpace) -> tuple[DiscreteMeasure, DiscreteMeasure]:
    w0 = np.zeros(space.n)
    w1 = np.zeros(space.n)
    w0[coupling.rows] = coupling.row_weights
    w1[coupling.cols] = coupling.col_weights
    return DiscreteMeasure(space, w0), DiscreteMeasure(space, w1)


def straight_line(p: np.ndarray, q: np.ndarray, t: float) -> np.ndarray:
    return (1.0 - t) * p + t * q


@dataclass
class TransportPlan:
    """A coupling lifted to geodesics of the model space.

    ``snap`` selects how t-points are put back on the grid: ``"cell"`` sends
    each pair's mass to the cell containing its t-point; ``"box"`` spreads it
    over the cells overlapped by the interpolated cell box, whose side along
    each axis is ``((1-t)*extent[0] + t*extent[1])`` cell edges.  Use extent
    ``(1, 0)`` when the target is a point mass.
    """

    coupling: Coupling
    space: FiniteCausalSpace
    geodesic: Callable[[np.ndarray, np.ndarray, float], np.ndarray] = straight_line
    snap: str = "cell"
    extent: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if self.space.coords is None:
            raise TransportError("plans need a model space with coordinates")
        if not self.coupling.is_causal():
            raise TransportError("plan carries mass on a causally unrelated pair")
        if self.snap not in ("cell", "box"):
            raise ValueError(f"unknown snap policy {self.snap!r}")

    def is_timelike(self) -> bool:
        return self.coupling.is_timelike()

    def atoms(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """t-points of all massed pairs and their masses."""
        r, c = np.nonzero(self.coupling.massed)
        p = self.space.coords[self.coupling.rows[r]]
        q = self.space.coords[self.coupling.cols[c]]
        return self.geodesic(p, q, t), self.coupling.pi[r, c]

    def pair_separations(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(source idx, target idx, ell, mass) over massed pairs."""
        r, c = np.nonzero(self.coupling.massed)
        return (self.coupling.rows[r], self.coupling.cols[c],
                self.coupling.ell[r, c], self.coupling.pi[r, c])


def plan_between(mu0: DiscreteMeasure, mu1: DiscreteMeasure, q: float, **kw) -> TransportPlan:
    value, coupling = solve_lq(mu0, mu1, q)
    if value == NEG_INF:
        raise NotTimelike("no causal coupling between the measures")
    return TransportPlan(coupling, mu0.space, **kw)


def _deposit_box(grid: GridSpec, centers: np.ndarray, masses: np.ndarray, width_cells: float) -> np.ndarray:
    """Mass of axis-aligned boxes of side ``width_cells`` edges spread by overlap."""
    D = grid.dim
    edges = grid.edges
    res = np.array(grid.resolution)
    out = np.zeros(grid.n_cells)
    if width_cells <= 1e-12:
        np.add.at(out, grid.locate(centers), masses)
        return out
    idx_axes, frac_axes = [], []
    for ax in range(D):
        w = width_cells * edges[ax]
        left = centers[:, ax] - 0.5 * w
        u = (left - grid.lo[ax]) / edges[ax]
        i0 = np.floor(u + 1e-9).astype(np.int64)
        f0 = np.clip((i0 + 1 - u) * edges[ax] / w, 0.0, 1.0)
        f0 = np.where(f0 > 1 - 1e-9, 1.0, f0)
        # a box starting just below a face belongs entirely to the next cell
        i0 = np.where(f0 < 1e-9, i0 + 1, i0)
        f0 = np.where(f0 < 1e-9, 1.0, f0)
        idx_axes.append(np.stack([i0, i0 + 1], axis=1))
        frac_axes.append(np.stack([f0, 1.0 - f0], axis=1))
    for combo in itertools.product((0, 1), repeat=D):
        frac = np.ones(centers.shape[0])
        cells = []
        for ax, k in enumerate(combo):
            frac = frac * frac_axes[ax][:, k]
            cells.append(idx_axes[ax][:, k])
        live = frac > 1e-12
        if not live.any():
            continue
        cells = np.stack(cells, axis=1)[live]
        if np.any(cells < 0) or np.any(cells >= res):
            raise OutOfDomain("interpolated mass leaves the grid")
        np.add.at(out, np.ravel_multi_index(tuple(cells.T), grid.resolution), masses[live] * frac[live])
    return out


def displacement_interpolate(plan: TransportPlan, t: float, grid: GridSpec | None = None) -> DiscreteMeasure:
    """Push the plan forward by ``e_t`` and snap the result to the grid."""
    if not 0 <= t <= 1:
        raise ValueError("t must lie in [0, 1]")
    grid = grid or plan.space.grid
    if grid is None or grid.n_cells != plan.space.n:
        raise TransportError("interpolation grid does not index the plan's space")
    pts, masses = plan.atoms(t)
    if plan.snap == "cell":
        w = np.zeros(grid.n_cells)
        np.add.at(w, grid.locate(pts), masses)
    else:
        width = (1.0 - t) * plan.extent[0] + t * plan.extent[1]
        w = _deposit_box(grid, pts, masses, width)
    return DiscreteMeasure(plan.space, w / w.sum())


# -- midpoints ---------------------------------------------------------------


def verify_midpoint(mu0, mu_t, mu1, t: float, q: float, tol: float = 1e-9):
    """Check that ``mu_t`` is a t-midpoint of ``mu0`` and ``mu1`` within ``tol``."""
    L = lq(mu0, mu1, q)
    left = lq(mu0, mu_t, q)
    right = lq(mu_t, mu1, q)

    def scaled(s):
        return NEG_INF if L == NEG_INF else s * L

    rep = VerificationReport("midpoint")
    for kind, lhs, rhs in (
        ("midpoint_left", left, scaled(t)),
        ("midpoint_right", right, scaled(1.0 - t)),
        ("midpoint_sum", L, left + right),
    ):
        if lhs == NEG_INF and rhs == NEG_INF:
            margin = 0.0
        else:
            margin = lhs - rhs
        rep.rows.append(CheckRow(kind, lhs, rhs, margin, bool(margin >= -tol), q=q, t=t))
    return rep


# -- correlated decompositions -----------------------------------------------


@dataclass
class CorrelatedPart:
    source: np.ndarray
    target: np.ndarray
    lam: float
    pi: np.ndarray = field(repr=False)


@dataclass
class CorrelatedDecomposition:
    coupling: Coupling
    parts: list[CorrelatedPart]
    delta: float

    def recombine(self) -> np.ndarray:
        """``sum lam_j pi_j`` laid out like ``coupling.pi``."""
        out = np.zeros_like(self.coupling.pi)
        for p in self.parts:
            out += p.lam * p.pi
        return out

    def as_simple(self, space: FiniteCausalSpace) -> tuple[SimpleDecomposition, SimpleDecomposition]:
        """Source and target decompositions, when every part is uniform on both ends."""
        src, tgt = [], []
        for p in self.parts:
            r = np.searchsorted(self.coupling.rows, p.source)
            c = np.searchsorted(self.coupling.cols, p.target)
            w0 = (p.lam * p.pi).sum(axis=1)[r]
            w1 = (p.lam * p.pi).sum(axis=0)[c]
            for idx, w in ((p.source, w0), (p.target, w1)):
                dens = w / space.ref_mass[idx]
                if not np.allclose(dens, dens[0], rtol=1e-9, atol=0):
                    raise TransportError("part is not uniform; measures are not simple on it")
            src.append((p.source, p.lam))
            tgt.append((p.target, p.lam))
        return SimpleDecomposition(space, tuple(src)), SimpleDecomposition(space, tuple(tgt))


def _diameter(x: np.ndarray) -> float:
    if x.shape[0] < 2:
        return 0.0
    d = x[:, None, :] - x[None, :, :]
    return float(np.sqrt((d ** 2).sum(-1)).max())


def correlated_decomposition(mu0: DiscreteMeasure, mu1: DiscreteMeasure, coupling: Coupling, delta: float) -> CorrelatedDecomposition:
    """Split a deterministic coupling into small source/target blocks.

    Sources are binned into cubes of diameter below ``delta``; each bin is
    refined by the bin of its image and by the density values at both ends,
    so every part has small source and target diameter and, for simple
    measures, constant density on each end.
    """
    space = mu0.space
    if space.coords is None:
        raise TransportError("correlated decomposition needs coordinates")
    if delta <= 0:
        raise ValueError("delta must be positive")
    massed = coupling.massed
    if np.any(massed.sum(axis=1) != 1):
        raise NotAMap("coupling splits mass from a source cell")
    tgt_of = np.argmax(massed, axis=1)
    D = space.coords.shape[1]
    side = delta / math.sqrt(D) * (1 - 1e-9)
    src_xyz = space.coords[coupling.rows]
    tgt_xyz = space.coords[coupling.cols[tgt_of]]
    src_bin = np.floor(src_xyz / side).astype(np.int64)
    tgt_bin = np.floor(tgt_xyz / side).astype(np.int64)
    rho0 = np.round(mu0.density[coupling.rows], 12)
    rho1 = np.round(mu1.density[coupling.cols[tgt_of]], 12)
    keys = [tuple(src_bin[r]) + tuple(tgt_bin[r]) + (rho0[r], rho1[r]) for r in range(coupling.rows.size)]
    groups: dict[tuple, list[int]] = {}
    for r, key in enumerate(keys):
        groups.setdefault(key, []).append(r)
    parts = []
    for key in sorted(groups):
        rs = np.array(groups[key], dtype=np.intp)
        cs = np.unique(tgt_of[rs])
        block = np.zeros_like(coupling.pi)
        block[rs, tgt_of[rs]] = coupling.pi[rs, tgt_of[rs]]
        lam = float(block.sum())
        source = coupling.rows[rs]
        target = coupling.cols[cs]
        assert _diameter(space.coords[source]) < delta and _diameter(space.coords[target]) < delta
        parts.append(CorrelatedPart(np.sort(source), np.sort(target), lam, block / lam))
    return CorrelatedDecomposition(coupling, parts, delta)

"""Verifiers for the timelike curvature-dimension and Brunn-Minkowski conditions.

Each verifier evaluates one inequality per ``t`` (and per ``N'`` where the
condition quantifies over it) and returns a :class:`VerificationReport`.
Margins are oriented so that ``margin >= 0`` means the inequality holds; a
row passes when ``margin >= -tol``.  Infinite distortion coefficients do not
raise: the row fails with reason ``DomainBlowup``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .causal import NEG_INF, FiniteCausalSpace
from .distortion import sigma, tau
from .measures import DiscreteMeasure, dirac, exp_entropy, renyi_entropy, uniform_measure
from .minkowski import GridSpec, NotTotallyTimelike, OutOfDomain, midpoint_set, theta
from .report import CheckRow, VerificationReport
from .transport import (
    ChronologyClass,
    NotTimelike,
    TransportPlan,
    classify_pair,
    displacement_interpolate,
    plan_between,
)

KINDS = ("TCD", "TCDe", "TMCP", "TMCPe", "TBM", "sTBM", "sTBMstar")
DEFAULT_T = (0.0, 0.125, 0.25, 0.5, 0.75, 1.0)
BLOWUP = "DomainBlowup"


def default_nprime(N: float) -> tuple[float, ...]:
    return (N + 1e-3, N + 1.0, 2.0 * N)


@dataclass
class ConditionSpec:
    """Which condition to check and on which ``t`` and ``N'`` grids."""

    kind: str
    K: float = 0.0
    N: float = 2.0
    q: float = 0.5
    t_grid: tuple[float, ...] = DEFAULT_T
    nprime_grid: tuple[float, ...] | None = None
    C: float = 2.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown condition kind {self.kind!r}; expected one of {KINDS}")
        if not self.N > 1:
            raise ValueError("N must exceed 1")
        if not 0 < self.q < 1:
            raise ValueError("q must lie in (0, 1)")
        self.t_grid = tuple(float(t) for t in self.t_grid)
        if any(not 0 <= t <= 1 for t in self.t_grid):
            raise ValueError("t values must lie in [0, 1]")
        if self.nprime_grid is None:
            self.nprime_grid = default_nprime(self.N)
        self.nprime_grid = tuple(float(n) for n in self.nprime_grid)
        if any(not n > self.N for n in self.nprime_grid):
            raise ValueError("every N' must exceed N")
        if self.C < 0:
            raise ValueError("tolerance constant C must be nonnegative")

    @property
    def uses_nprime(self) -> bool:
        return self.kind in ("TCD", "TMCP")

    @property
    def uses_plan(self) -> bool:
        return self.kind != "TBM"


def _row(kind, lhs, rhs, margin, tol, reason="", **params) -> CheckRow:
    if math.isnan(margin):
        margin = -math.inf
    if reason == "" and margin == -math.inf and (math.isinf(lhs) or math.isinf(rhs)):
        reason = BLOWUP
    ok = reason == "" and margin >= -tol
    return CheckRow(kind, float(lhs), float(rhs), float(margin), bool(ok), reason=reason, **params)


def _theta_plus(space: FiniteCausalSpace, A: np.ndarray, B: np.ndarray, K: float) -> float:
    """Theta over ``A x B`` using the positive part of ``ell``."""
    ell = np.maximum(space.sep(A, B), 0.0)
    return float(ell.min() if K >= 0 else ell.max())


# -- Brunn-Minkowski type -----------------------------------------------------


def verify_tbm(
    space: FiniteCausalSpace,
    A: Iterable[int],
    B: Iterable[int],
    t_grid: Sequence[float] | float,
    K: float,
    N: float,
    plan: TransportPlan | None = None,
    variant: str = "TBM",
    tol: float = 0.0,
    q: float = 0.5,
    grid: GridSpec | None = None,
) -> VerificationReport:
    """``m(S_t)^(1/N) >= c^(1-t)(Theta) m(A)^(1/N) + c^(t)(Theta) m(B)^(1/N)``.

    ``S_t`` is the snapped midpoint set ``G_t(A, B)`` for ``TBM`` and the
    support of the plan's t-marginal for ``sTBM``/``sTBMstar``.  The
    coefficient ``c`` is ``tau_{K,N}`` except for ``sTBMstar`` which uses
    ``sigma_{K/N}``.
    """
    if variant not in ("TBM", "sTBM", "sTBMstar"):
        raise ValueError(f"unknown BM variant {variant!r}")
    A = np.unique(np.asarray(list(A) if not isinstance(A, np.ndarray) else A, dtype=np.intp))
    B = np.unique(np.asarray(list(B) if not isinstance(B, np.ndarray) else B, dtype=np.intp))
    ts = (t_grid,) if np.isscalar(t_grid) else tuple(t_grid)
    rep = VerificationReport(variant)
    mA = float(space.ref_mass[A].sum())
    mB = float(space.ref_mass[B].sum())

    if variant == "TBM":
        Theta = theta(space, A, B, K).value
    else:
        if plan is None:
            mu0, mu1 = uniform_measure(space, A), uniform_measure(space, B)
            plan = plan_between(mu0, mu1, q)
        if not plan.is_timelike():
            raise NotTimelike("strong BM needs a timelike plan")
        cls = classify_pair(uniform_measure(space, A), uniform_measure(space, B), q)
        rep.info["chronology"] = cls.name
        if cls < ChronologyClass.Q_TIMELIKE:
            raise NotTimelike(f"(A, B) is only {cls.name}, not q-timelike")
        Theta = _theta_plus(space, A, B, K)
    rep.info["Theta"] = Theta

    for t in ts:
        if variant == "TBM":
            lhs_set = midpoint_set(space, A, B, t, grid=grid).mass
        else:
            mu_t = displacement_interpolate(plan, t, grid)
            lhs_set = mu_t.support_mass()
        lhs = lhs_set ** (1.0 / N)
        if variant == "sTBMstar":
            c0, c1 = sigma(K / N, 1.0 - t, Theta), sigma(K / N, t, Theta)
        else:
            c0, c1 = tau(K, N, 1.0 - t, Theta), tau(K, N, t, Theta)
        if math.isinf(c0) or math.isinf(c1):
            rep.rows.append(_row(variant, lhs, math.inf, -math.inf, tol, BLOWUP, K=K, N=N, q=q, t=t))
            continue
        rhs = c0 * mA ** (1.0 / N) + c1 * mB ** (1.0 / N)
        rep.rows.append(_row(variant, lhs, rhs, lhs - rhs, tol, K=K, N=N, q=q, t=t))
    return rep


# -- entropy conditions -------------------------------------------------------


def _require_timelike(plan: TransportPlan) -> None:
    if not plan.is_timelike():
        raise NotTimelike("plan carries mass on a null pair")


def _interpolants(plan, ts, grid):
    return {t: displacement_interpolate(plan, t, grid) for t in sorted(set(ts))}


def verify_tcd(
    mu0: DiscreteMeasure,
    mu1: DiscreteMeasure,
    plan: TransportPlan,
    K: float,
    N: float,
    nprime_grid: Sequence[float] | None = None,
    t_grid: Sequence[float] = DEFAULT_T,
    grid: GridSpec | None = None,
    tol: float = 0.0,
) -> VerificationReport:
    """``S_{N'}(mu_t) <= -sum pi [tau^(1-t)(ell) rho0^(-1/N') + tau^(t)(ell) rho1^(-1/N')]``."""
    _require_timelike(plan)
    nprime_grid = tuple(nprime_grid) if nprime_grid is not None else default_nprime(N)
    if any(not n > N for n in nprime_grid):
        raise ValueError("every N' must exceed N")
    src, tgt, ell, mass = plan.pair_separations()
    rho0 = mu0.density[src]
    rho1 = mu1.density[tgt]
    mus = _interpolants(plan, t_grid, grid)
    rep = VerificationReport("TCD")
    q = plan.coupling.q
    for t in sorted(set(t_grid)):
        for Np in nprime_grid:
            lhs = renyi_entropy(mus[t], Np)
            c0 = tau(K, Np, 1.0 - t, ell)
            c1 = tau(K, Np, t, ell)
            if np.any(np.isinf(c0)) or np.any(np.isinf(c1)):
                rep.rows.append(_row("TCD", lhs, NEG_INF, -math.inf, tol, BLOWUP, K=K, N=N, q=q, t=t, Nprime=Np))
                continue
            rhs = -float(np.sum(mass * (c0 * rho0 ** (-1.0 / Np) + c1 * rho1 ** (-1.0 / Np))))
            rep.rows.append(_row("TCD", lhs, rhs, rhs - lhs, tol, K=K, N=N, q=q, t=t, Nprime=Np))
    return rep


def verify_tcd_e(
    mu0: DiscreteMeasure,
    mu1: DiscreteMeasure,
    plan: TransportPlan,
    K: float,
    N: float,
    t_grid: Sequence[float] = DEFAULT_T,
    grid: GridSpec | None = None,
    tol: float = 0.0,
) -> VerificationReport:
    """``U_N(mu_t) >= sigma^(1-t)(Lambda) U_N(mu0) + sigma^(t)(Lambda) U_N(mu1)``."""
    _require_timelike(plan)
    _, _, ell, mass = plan.pair_separations()
    Lam = math.sqrt(float(np.sum(mass * ell ** 2)))
    u0, u1 = exp_entropy(mu0, N), exp_entropy(mu1, N)
    mus = _interpolants(plan, t_grid, grid)
    rep = VerificationReport("TCDe", info={"Lambda": Lam})
    q = plan.coupling.q
    for t in sorted(set(t_grid)):
        lhs = exp_entropy(mus[t], N)
        c0, c1 = sigma(K / N, 1.0 - t, Lam), sigma(K / N, t, Lam)
        if math.isinf(c0) or math.isinf(c1):
            rep.rows.append(_row("TCDe", lhs, math.inf, -math.inf, tol, BLOWUP, K=K, N=N, q=q, t=t))
            continue
        rhs = c0 * u0 + c1 * u1
        rep.rows.append(_row("TCDe", lhs, rhs, lhs - rhs, tol, K=K, N=N, q=q, t=t))
    return rep


def verify_tmcp(
    mu: DiscreteMeasure,
    x0: int,
    plan: TransportPlan | None,
    K: float,
    N: float,
    variant: str = "TMCP",
    t_grid: Sequence[float] = DEFAULT_T,
    nprime_grid: Sequence[float] | None = None,
    grid: GridSpec | None = None,
    tol: float = 0.0,
    q: float = 0.5,
) -> VerificationReport:
    """Measure contraction toward the point ``x0`` along the plan ``mu -> delta_x0``.

    ``TMCP``: ``S_{N'}(mu_t) <= -sum tau^(1-t)(ell(a, x0)) rho(a)^(-1/N') mu_a``.
    ``TMCPe``: ``U_N(mu_t) >= sigma^(1-t)(Lambda) U_N(mu)`` with
    ``Lambda^2 = sum mu_a ell(a, x0)^2``.
    """
    if variant not in ("TMCP", "TMCPe"):
        raise ValueError(f"unknown contraction variant {variant!r}")
    space = mu.space
    supp = mu.support
    ell = space.sep(supp, np.array([x0]))[:, 0]
    if np.any(~(ell > 0)):
        raise NotTotallyTimelike("support of mu is not in the chronological past of x0")
    if plan is None:
        plan = plan_between(mu, dirac(space, x0), q, snap="box", extent=(1.0, 0.0))
    _require_timelike(plan)
    q = plan.coupling.q
    w = mu.weights[supp]
    rho = mu.density[supp]
    mus = _interpolants(plan, t_grid, grid)
    rep = VerificationReport(variant)
    if variant == "TMCP":
        nprime_grid = tuple(nprime_grid) if nprime_grid is not None else default_nprime(N)
        if any(not n > N for n in nprime_grid):
            raise ValueError("every N' must exceed N")
        for t in sorted(set(t_grid)):
            for Np in nprime_grid:
                lhs = renyi_entropy(mus[t], Np)
                c0 = tau(K, Np, 1.0 - t, ell)
                if np.any(np.isinf(c0)):
                    rep.rows.append(_row(variant, lhs, NEG_INF, -math.inf, tol, BLOWUP, K=K, N=N, q=q, t=t, Nprime=Np))
                    continue
                rhs = -float(np.sum(c0 * rho ** (-1.0 / Np) * w))
                rep.rows.append(_row(variant, lhs, rhs, rhs - lhs, tol, K=K, N=N, q=q, t=t, Nprime=Np))
        return rep

    Lam = math.sqrt(float(np.sum(w * ell ** 2)))
    rep.info["Lambda"] = Lam
    u = exp_entropy(mu, N)
    for t in sorted(set(t_grid)):
        lhs = exp_entropy(mus[t], N)
        c0 = sigma(K / N, 1.0 - t, Lam)
        if math.isinf(c0):
            rep.rows.append(_row(variant, lhs, math.inf, -math.inf, tol, BLOWUP, K=K, N=N, q=q, t=t))
            continue
        rhs = c0 * u
        rep.rows.append(_row(variant, lhs, rhs, lhs - rhs, tol, K=K, N=N, q=q, t=t))
    return rep


def verify_condition(
    spec: ConditionSpec,
    mu0: DiscreteMeasure,
    mu1: DiscreteMeasure | None = None,
    plan: TransportPlan | None = None,
    *,
    A: np.ndarray | None = None,
    B: np.ndarray | None = None,
    x0: int | None = None,
    grid: GridSpec | None = None,
    tol: float = 0.0,
) -> VerificationReport:
    """Dispatch on ``spec.kind``; rows failing a precondition get its name as reason."""
    try:
        if spec.kind in ("TBM", "sTBM", "sTBMstar"):
            return verify_tbm(mu0.space, A, B, spec.t_grid, spec.K, spec.N, plan, spec.kind, tol, spec.q, grid)
        if spec.kind == "TCD":
            return verify_tcd(mu0, mu1, plan, spec.K, spec.N, spec.nprime_grid, spec.t_grid, grid, tol)
        if spec.kind == "TCDe":
            return verify_tcd_e(mu0, mu1, plan, spec.K, spec.N, spec.t_grid, grid, tol)
        return verify_tmcp(mu0, x0, plan, spec.K, spec.N, spec.kind, spec.t_grid, spec.nprime_grid, grid, tol, spec.q)
    except (NotTotallyTimelike, NotTimelike, OutOfDomain) as exc:
        rep = VerificationReport(spec.kind, info={"error": str(exc)})
        rep.rows.append(CheckRow(spec.kind, math.nan, math.nan, -math.inf, False,
                                 K=spec.K, N=spec.N, q=spec.q, reason=type(exc).__name__))
        return rep

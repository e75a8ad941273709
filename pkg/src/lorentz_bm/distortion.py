"""Distortion coefficients sigma and tau and their structural properties.

All functions broadcast over numpy arrays.  Outside the guarded domain
``k * theta**2 < pi**2`` the coefficients are ``+inf`` for every ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .report import CheckRow, VerificationReport

SERIES_CUTOFF = 1e-8
PI2 = math.pi ** 2


def _series_sin(x):
    # sin_k(t) / t to third order in x = k t^2
    return 1.0 - x / 6.0 + x * x / 120.0


def sin_k(k, t):
    """Solution of ``f'' + k f = 0`` with ``f(0) = 0``, ``f'(0) = 1``."""
    k, t = np.broadcast_arrays(np.asarray(k, dtype=float), np.asarray(t, dtype=float))
    x = k * t * t
    out = t * _series_sin(x)
    pos = (x >= SERIES_CUTOFF) & (k > 0)
    neg = (x <= -SERIES_CUTOFF) & (k < 0)
    with np.errstate(over="ignore"):
        s = np.sqrt(np.abs(k))
        out = np.where(pos, np.sin(s * t) / np.where(pos, s, 1.0), out)
        out = np.where(neg, np.sinh(s * t) / np.where(neg, s, 1.0), out)
    return out if out.ndim else float(out)


def sigma(k, t, theta):
    """Reduced coefficient ``sin_k(t theta) / sin_k(theta)``; ``+inf`` off the guard.

    ``sigma(k, t, 0) = t``.  For ``k < 0`` the ratio of hyperbolic sines is
    evaluated in exponential form so large arguments do not overflow.
    """
    k, t, theta = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (k, t, theta)))
    x = k * theta * theta
    guarded = x < PI2
    small = np.abs(x) < SERIES_CUTOFF
    out = t * _series_sin(x * t * t) / _series_sin(x)

    a = np.sqrt(np.abs(x))
    pos = guarded & ~small & (k > 0)
    neg = ~small & (k < 0)
    with np.errstate(all="ignore"):
        ratio_pos = np.sin(t * a) / np.sin(a)
        ratio_neg = np.exp((t - 1.0) * a) * np.expm1(-2.0 * t * a) / np.expm1(-2.0 * a)
    out = np.where(pos, ratio_pos, out)
    out = np.where(neg, ratio_neg, out)
    # endpoints exactly
    out = np.where(t == 1.0, 1.0, np.where(t == 0.0, 0.0, out))
    out = np.where(guarded, out, math.inf)
    return out if out.ndim else float(out)


def tau(K, N, t, theta):
    """``t**(1/N) * sigma_{K/(N-1)}(t, theta)**(1 - 1/N)``, infinite when sigma is.

    Evaluated as ``exp(log_tau)`` so that an underflowing sigma raised to a
    small power ``1 - 1/N`` still gives the right value.
    """
    lt = np.asarray(log_tau(K, N, t, theta))
    out = np.exp(lt)
    out = np.where(np.isnan(lt), math.inf, out)
    return out if out.ndim else float(out)


def log_sigma(k, t, theta):
    """``log sigma(k, t, theta)``, evaluated without underflow for ``k < 0``."""
    k, t, theta = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (k, t, theta)))
    a = np.sqrt(np.abs(k * theta * theta))
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = np.log(np.asarray(sigma(k, t, theta)))
        hyper = (t - 1.0) * a + np.log(np.expm1(-2.0 * t * a) / np.expm1(-2.0 * a))
    use = (k < 0) & (np.abs(k * theta * theta) >= SERIES_CUTOFF) & (t > 0) & (t < 1)
    out = np.where(use, hyper, direct)
    return out if out.ndim else float(out)


def log_tau(K, N, t, theta):
    """``log tau(K, N, t, theta)`` in log space."""
    K, N, t, theta = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (K, N, t, theta)))
    if np.any(N <= 1):
        raise ValueError("tau needs N > 1")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(t) / N + (1.0 - 1.0 / N) * np.asarray(log_sigma(K / (N - 1.0), t, theta))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class DistortionParams:
    """One evaluation point ``(K, N, t, theta)`` of the coefficients."""

    K: float
    N: float
    t: float
    theta: float

    def __post_init__(self):
        if not self.N > 1:
            raise ValueError("N must exceed 1")
        if not 0 <= self.t <= 1:
            raise ValueError("t must lie in [0, 1]")
        if self.theta < 0:
            raise ValueError("theta must be nonnegative")

    @property
    def guarded(self) -> bool:
        return self.K / (self.N - 1) * self.theta ** 2 < PI2

    def sigma(self) -> float:
        return sigma(self.K / (self.N - 1), self.t, self.theta)

    def tau(self) -> float:
        return tau(self.K, self.N, self.t, self.theta)


@dataclass
class DistortionSamples:
    """Arrays of guarded parameters for the property checks."""

    K: np.ndarray
    N: np.ndarray
    t: np.ndarray
    theta: np.ndarray
    theta2: np.ndarray
    a: np.ndarray
    dK: np.ndarray

    def __len__(self) -> int:
        return self.K.size


def guarded_theta_max(K, N, eps: float = 1e-2, frac: float = 0.9):
    """``frac * pi / sqrt(max(K/(N-1), eps))``: the sampling range for theta."""
    return frac * math.pi / np.sqrt(np.maximum(np.asarray(K) / (np.asarray(N) - 1.0), eps))


def sample_guarded(rng: np.random.Generator, n: int, K_range=(-5.0, 5.0), N_max: float = 10.0) -> DistortionSamples:
    """Random parameters with ``K/(N-1) * theta**2`` safely below ``pi**2``.

    ``a`` is kept in ``[0, 1]`` when ``K > 0`` so that ``a * theta`` stays
    guarded; ``dK >= 0`` is a decrement used for monotonicity in ``K``.
    """
    K = rng.uniform(*K_range, size=n)
    N = 1.0 + (N_max - 1.0) * (1.0 - rng.random(n))
    t = rng.random(n)
    top = guarded_theta_max(K, N)
    theta = top * rng.random(n)
    theta2 = top * rng.random(n)
    a = np.where(K > 0, rng.random(n), 3.0 * rng.random(n))
    dK = rng.uniform(0.0, 2.0, size=n)
    return DistortionSamples(K, N, t, theta, theta2, a, dK)


def check_distortion_properties(
    s: DistortionSamples,
    scale_tol: float = 1e-10,
    order_tol: float = 1e-12,
    convex_tol: float = 1e-12,
) -> VerificationReport:
    """Scaling, ``sigma_{K/N} <= tau_{K,N}``, log-convexity and monotonicity.

    Each property contributes one row whose ``lhs`` is the worst violation
    and ``rhs`` the tolerance; offending sample indices go to ``violations``.
    Endpoint normalization is checked exactly.
    """
    with np.errstate(invalid="ignore", divide="ignore"):
        return _check(s, scale_tol, order_tol, convex_tol)


def _check(s, scale_tol, order_tol, convex_tol):
    rep = VerificationReport("distortion")
    K, N, t, th, th2, a = s.K, s.N, s.t, s.theta, s.theta2, s.a

    def record(name, excess, tol):
        bad = np.flatnonzero(~(excess <= tol))
        for i in bad:
            rep.add_violation((name, int(i)))
        worst = float(np.max(np.where(np.isnan(excess), math.inf, excess), initial=-math.inf))
        rep.rows.append(CheckRow(name, worst, tol, tol - worst, bad.size == 0))

    k = K / (N - 1.0)
    lhs = sigma(k, t, a * th)
    rhs = sigma(a * a * k, t, th)
    record("scaling", np.abs(lhs - rhs) / np.maximum(1.0, np.abs(rhs)), scale_tol)

    sg = sigma(K / N, t, th)
    tu = tau(K, N, t, th)
    record("sigma_le_tau", (sg - tu) / np.maximum(1.0, np.abs(tu)), order_tol)

    # theta -> tau(sqrt(theta)) log-convex: compare at the mean of theta^2
    inner = t > 0
    mid = np.sqrt(0.5 * (th ** 2 + th2 ** 2))
    lm = log_tau(K, N, t, mid)
    la = log_tau(K, N, t, th)
    lb = log_tau(K, N, t, th2)
    excess = np.where(inner, lm - 0.5 * (la + lb), -math.inf)
    record("logconvex_theta", excess, convex_tol)

    # K -> tau log-convex and non-decreasing on the guarded domain
    K1 = K - s.dK
    Km = K - 0.5 * s.dK
    t1 = tau(K1, N, t, th)
    excess = np.where(inner, log_tau(Km, N, t, th) - 0.5 * (log_tau(K1, N, t, th) + la), -math.inf)
    record("logconvex_K", excess, convex_tol)
    record("monotone_K", (t1 - tu) / np.maximum(1.0, np.abs(tu)), order_tol)

    ends = np.concatenate([
        sigma(k, 0.0, th), sigma(k, 1.0, th) - 1.0,
        tau(K, N, 0.0, th), tau(K, N, 1.0, th) - 1.0,
    ])
    record("endpoints", np.abs(ends), 0.0)
    return rep

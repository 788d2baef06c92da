"""Interpolant schedules, interpolant sampling, and per-sample regression residuals.

A schedule is the triple (alpha, beta, gamma) of time functions on [0, 1],
together with their analytic derivatives and a diffusion coefficient epsilon.
The interpolant bridges a clean sample x0 and a corrupted sample x1:

    I_t = alpha(t) x0 + beta(t) x1 + gamma(t) z,   z ~ N(0, I).

Boundary conditions: alpha(0) = beta(1) = 1, alpha(1) = beta(0) = 0,
gamma(0) = gamma(1) = 0, so I_0 = x0 and I_1 = x1 exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "Schedule",
    "InterpolantSample",
    "make_schedule",
    "SCHEDULE_KINDS",
    "sample_interpolant",
    "interpolant_batch",
    "drift_residual",
    "denoiser_residual",
    "combined_residual",
    "T_MIN",
]

# Training-time clamp: times are sampled on [T_MIN, 1 - T_MIN] so that the
# 1/gamma(t) score multiplier and the sqrt-schedule derivative stay bounded.
T_MIN = 1e-3

SCHEDULE_KINDS = ("ode-linear", "sde-linear", "sqrt-awgn")


@dataclass(frozen=True)
class Schedule:
    """Interpolant schedule: value/derivative callables plus diffusion epsilon.

    The callables accept scalars or numpy arrays of times. Derivatives are
    analytic, not numeric, so interpolant velocities are exact.
    """

    kind: str
    alpha: Callable[[np.ndarray], np.ndarray]
    beta: Callable[[np.ndarray], np.ndarray]
    gamma: Callable[[np.ndarray], np.ndarray]
    alpha_dot: Callable[[np.ndarray], np.ndarray]
    beta_dot: Callable[[np.ndarray], np.ndarray]
    gamma_dot: Callable[[np.ndarray], np.ndarray]
    epsilon: float = 0.0

    def has_noise(self) -> bool:
        """True when gamma is not identically zero."""
        return self.kind == "sde-linear"


def make_schedule(kind: str, epsilon: float | None = None) -> Schedule:
    """Construct one of the built-in schedules.

    kinds:
      "ode-linear": alpha = 1-t, beta = t, gamma = 0, epsilon = 0.
      "sde-linear": alpha = 1-t, beta = t, gamma = t(1-t), epsilon = 0.1.
      "sqrt-awgn":  alpha = 1-sqrt(t), beta = sqrt(t), gamma = 0, epsilon = 0.
                    The derivative of beta blows up at t=0; callers sample
                    times on [T_MIN, 1-T_MIN].
    """
    if kind == "ode-linear":
        eps = 0.0 if epsilon is None else float(epsilon)
        return Schedule(
            kind=kind,
            alpha=lambda t: 1.0 - np.asarray(t, dtype=float),
            beta=lambda t: np.asarray(t, dtype=float),
            gamma=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
            alpha_dot=lambda t: -np.ones_like(np.asarray(t, dtype=float)),
            beta_dot=lambda t: np.ones_like(np.asarray(t, dtype=float)),
            gamma_dot=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
            epsilon=eps,
        )
    if kind == "sde-linear":
        eps = 0.1 if epsilon is None else float(epsilon)
        return Schedule(
            kind=kind,
            alpha=lambda t: 1.0 - np.asarray(t, dtype=float),
            beta=lambda t: np.asarray(t, dtype=float),
            gamma=lambda t: np.asarray(t, dtype=float) * (1.0 - np.asarray(t, dtype=float)),
            alpha_dot=lambda t: -np.ones_like(np.asarray(t, dtype=float)),
            beta_dot=lambda t: np.ones_like(np.asarray(t, dtype=float)),
            gamma_dot=lambda t: 1.0 - 2.0 * np.asarray(t, dtype=float),
            epsilon=eps,
        )
    if kind == "sqrt-awgn":
        eps = 0.0 if epsilon is None else float(epsilon)
        return Schedule(
            kind=kind,
            alpha=lambda t: 1.0 - np.sqrt(np.asarray(t, dtype=float)),
            beta=lambda t: np.sqrt(np.asarray(t, dtype=float)),
            gamma=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
            alpha_dot=lambda t: -0.5 / np.sqrt(np.asarray(t, dtype=float)),
            beta_dot=lambda t: 0.5 / np.sqrt(np.asarray(t, dtype=float)),
            gamma_dot=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
            epsilon=eps,
        )
    raise ValueError(f"unknown schedule kind {kind!r}; expected one of {SCHEDULE_KINDS}")


@dataclass(frozen=True)
class InterpolantSample:
    """One draw of the interpolant and its velocity at a fixed time.

    i_t   = alpha(t) x0 + beta(t) x1 + gamma(t) z
    i_dot = alpha'(t) x0 + beta'(t) x1 + gamma'(t) z
    """

    t: float
    i_t: np.ndarray
    i_dot: np.ndarray
    z: np.ndarray
    x0: np.ndarray
    x1: np.ndarray
    sched: Schedule


def sample_interpolant(
    x0: np.ndarray,
    x1: np.ndarray,
    t: float,
    rng: np.random.Generator,
    sched: Schedule,
) -> InterpolantSample:
    """Draw z fresh and evaluate the interpolant and its time derivative.

    z is materialized even when gamma(t) = 0: it is still the regression
    target of the denoiser loss on schedules with nonzero gamma elsewhere.
    """
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    if x0.shape != x1.shape:
        raise ValueError(f"endpoint dimension mismatch: {x0.shape} vs {x1.shape}")
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"time {t} outside [0, 1]")
    z = rng.standard_normal(x0.shape)
    i_t = sched.alpha(t) * x0 + sched.beta(t) * x1 + sched.gamma(t) * z
    i_dot = sched.alpha_dot(t) * x0 + sched.beta_dot(t) * x1 + sched.gamma_dot(t) * z
    return InterpolantSample(t=t, i_t=i_t, i_dot=i_dot, z=z, x0=x0, x1=x1, sched=sched)


def interpolant_batch(
    x0: np.ndarray,
    x1: np.ndarray,
    t: np.ndarray,
    z: np.ndarray,
    sched: Schedule,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized interpolant evaluation: rows are samples, t has one entry per row.

    Returns (i_t, i_dot), each of shape (n, d).
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError("times outside [0, 1]")
    if x0.shape != x1.shape or x0.shape != z.shape:
        raise ValueError("x0, x1, z must share a shape")
    a = sched.alpha(t)[:, None]
    b = sched.beta(t)[:, None]
    g = sched.gamma(t)[:, None]
    ad = sched.alpha_dot(t)[:, None]
    bd = sched.beta_dot(t)[:, None]
    gd = sched.gamma_dot(t)[:, None]
    i_t = a * x0 + b * x1 + g * z
    i_dot = ad * x0 + bd * x1 + gd * z
    return i_t, i_dot


def _check_match(v: np.ndarray, ref: np.ndarray, what: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != ref.shape:
        raise ValueError(f"{what} dimension mismatch: {v.shape} vs {ref.shape}")
    return v


def drift_residual(b_hat: np.ndarray, s: InterpolantSample) -> float:
    """Squared error of a drift prediction against the interpolant velocity."""
    b_hat = _check_match(b_hat, s.i_dot, "drift prediction")
    d = b_hat - s.i_dot
    return float(d @ d)


def denoiser_residual(g_hat: np.ndarray, s: InterpolantSample) -> float:
    """Squared error of a denoiser prediction against the injected noise.

    Only defined where gamma(t) > 0 (the score identity divides by gamma).
    """
    if s.sched.gamma(s.t) <= 0.0:
        raise ValueError(
            f"denoiser residual undefined: schedule {s.sched.kind!r} has gamma({s.t}) = 0"
        )
    g_hat = _check_match(g_hat, s.z, "denoiser prediction")
    d = g_hat - s.z
    return float(d @ d)


def combined_residual(v_hat: np.ndarray, s: InterpolantSample, sched: Schedule) -> float:
    """Squared error of a combined-drift prediction.

    Target is i_dot + epsilon * z / gamma(t); with epsilon = 0 this reduces
    exactly to the drift residual.
    """
    if sched.epsilon == 0.0:
        return drift_residual(v_hat, s)
    g = float(sched.gamma(s.t))
    if g <= 0.0:
        raise ValueError(
            f"combined residual with epsilon={sched.epsilon} needs gamma(t) > 0, got gamma({s.t}) = {g}"
        )
    target = s.i_dot + (sched.epsilon / g) * s.z
    v_hat = _check_match(v_hat, target, "combined prediction")
    d = v_hat - target
    return float(d @ d)

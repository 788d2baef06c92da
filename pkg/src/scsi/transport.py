"""Reverse-time transport: probability-flow ODE and reverse SDE integrators.

Integration runs backward in interpolant time on the clamped window
[t_min, 1 - t_min] with a uniform grid; the clamp keeps the 1/gamma score
multiplier and singular schedule derivatives away from the endpoints, where
the integrand is extended constantly. Drift and denoiser callables take
(t, X, latents) with X of shape (n, d) and return an (n, d) array.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "TransportConfig",
    "TransportDivergedError",
    "integrate_ode",
    "integrate_sde",
    "pushforward",
]


@dataclass(frozen=True)
class TransportConfig:
    """Backward-transport settings.

    mode "ode" integrates dX = b dt with scheme "heun" (default) or "euler";
    mode "sde" runs Euler-Maruyama on dX = (b + eps/gamma * g) dt + sqrt(2 eps) dW.
    eps_schedule "gamma" replaces the constant eps by eps * gamma(t), which
    removes the 1/gamma factor from the drift term and scales the noise by
    sqrt(gamma(t)).
    """

    steps: int = 64
    mode: str = "ode"
    epsilon: float = 0.0
    scheme: str = "heun"
    t_min: float = 1e-3
    eps_schedule: str = "constant"

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.mode not in ("ode", "sde"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.scheme not in ("heun", "euler"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.mode == "sde" and self.epsilon <= 0:
            raise ValueError("sde mode requires epsilon > 0")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if not 0.0 < self.t_min < 0.5:
            raise ValueError("t_min must lie in (0, 0.5)")
        if self.eps_schedule not in ("constant", "gamma"):
            raise ValueError(f"unknown eps_schedule {self.eps_schedule!r}")


class TransportDivergedError(RuntimeError):
    """Raised when the integrator state stops being finite."""

    def __init__(self, step: int, sample_indices):
        self.step = step
        self.sample_indices = list(np.atleast_1d(sample_indices))
        super().__init__(
            f"non-finite transport state at step {step} (samples {self.sample_indices})"
        )


def _time_grid(cfg: TransportConfig) -> np.ndarray:
    # descending: t_max -> t_min
    return np.linspace(1.0 - cfg.t_min, cfg.t_min, cfg.steps + 1)


def _check_state(x: np.ndarray, step: int) -> None:
    finite = np.isfinite(x).all(axis=-1)
    if not finite.all():
        bad = np.nonzero(~finite)[0]
        raise TransportDivergedError(step, bad)


def _integrate_ode_batch(drift, ys: np.ndarray, latents, cfg: TransportConfig) -> np.ndarray:
    grid = _time_grid(cfg)
    x = np.array(ys, dtype=float, copy=True)
    _check_state(x, 0)
    for j in range(cfg.steps):
        t, t_next = grid[j], grid[j + 1]
        h = t - t_next
        k1 = drift(t, x, latents)
        if cfg.scheme == "euler":
            x = x - h * k1
        else:
            x_pred = x - h * k1
            k2 = drift(t_next, x_pred, latents)
            x = x - 0.5 * h * (k1 + k2)
        _check_state(x, j + 1)
    return x


def _integrate_sde_batch(drift_b, denoiser_g, ys, latents, rng, cfg, sched) -> np.ndarray:
    grid = _time_grid(cfg)
    gammas = sched.gamma(grid)
    if cfg.eps_schedule == "constant" and denoiser_g is not None:
        if np.any(gammas[:-1] <= 0.0):
            raise ValueError(
                "gamma(t) = 0 inside the integration window; the eps/gamma score term is undefined"
            )
    x = np.array(ys, dtype=float, copy=True)
    _check_state(x, 0)
    n, d = x.shape
    for j in range(cfg.steps):
        t, t_next = grid[j], grid[j + 1]
        h = t - t_next
        total = drift_b(t, x, latents)
        if cfg.eps_schedule == "constant":
            eps_t = cfg.epsilon
            if denoiser_g is not None and eps_t > 0.0:
                total = total + (eps_t / gammas[j]) * denoiser_g(t, x, latents)
        else:
            eps_t = cfg.epsilon * gammas[j]
            if denoiser_g is not None and eps_t > 0.0:
                total = total + cfg.epsilon * denoiser_g(t, x, latents)
        noise = np.sqrt(max(2.0 * eps_t * h, 0.0)) * rng.standard_normal((n, d))
        x = x - h * total + noise
        _check_state(x, j + 1)
    return x


def integrate_ode(drift, y: np.ndarray, latent, cfg: TransportConfig) -> np.ndarray:
    """Deterministic backward transport of a single observation."""
    if cfg.mode != "ode":
        raise ValueError("integrate_ode requires cfg.mode == 'ode'")
    y = np.asarray(y, dtype=float)
    lat = None if latent is None else np.asarray(latent, dtype=float)[None, :]
    out = _integrate_ode_batch(drift, y[None, :], lat, cfg)
    return out[0]


def integrate_sde(drift_b, denoiser_g, y, latent, rng, cfg: TransportConfig, sched) -> np.ndarray:
    """Euler-Maruyama backward transport of a single observation with fresh
    Brownian increments. denoiser_g may be None when the drift already
    contains the score term (combined-drift models)."""
    if cfg.mode != "sde":
        raise ValueError("integrate_sde requires cfg.mode == 'sde'")
    y = np.asarray(y, dtype=float)
    lat = None if latent is None else np.asarray(latent, dtype=float)[None, :]
    out = _integrate_sde_batch(drift_b, denoiser_g, y[None, :], lat, rng, cfg, sched)
    return out[0]


def pushforward(
    drift,
    ys: np.ndarray,
    latents=None,
    rng: np.random.Generator | None = None,
    cfg: TransportConfig = TransportConfig(),
    sched=None,
    denoiser=None,
) -> np.ndarray:
    """Apply the backward transport to every row of ys, preserving order.

    ODE mode is deterministic; SDE mode draws independent Brownian paths per
    sample from `rng` and needs the interpolant schedule for gamma.
    """
    ys = np.asarray(ys, dtype=float)
    if ys.ndim != 2 or ys.shape[0] == 0:
        raise ValueError("ys must be a nonempty (n, d) batch")
    if latents is not None:
        latents = np.asarray(latents, dtype=float)
        if latents.shape[0] != ys.shape[0]:
            raise ValueError("latents must have one row per observation")
    if cfg.mode == "ode":
        return _integrate_ode_batch(drift, ys, latents, cfg)
    if sched is None:
        raise ValueError("sde pushforward needs the interpolant schedule")
    if rng is None:
        raise ValueError("sde pushforward needs a generator")
    return _integrate_sde_batch(drift, denoiser, ys, latents, rng, cfg, sched)

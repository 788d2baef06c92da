"""Bi-level self-consistency training.

Each outer iteration freezes the current transport map, regenerates endpoint
pairs by pushing observations backward through it and re-corrupting them
through the black-box channel, and then takes a fixed number of Adam steps
on the interpolant regression loss. Gradients never flow through the
transport map or the channel: both are plain numerical sampling here, which
is exactly the stop-gradient semantics of the one-inner-step scheme.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelSpec, apply_channel
from .gaussian import GaussianModel, solution_map_B, transport_noise_cov
from .nets import (
    Regressor,
    adam_step,
    clone_params,
    forward,
    loss_and_grad,
    make_optimizer,
    save_checkpoint,
)
from .schedules import Schedule, interpolant_batch
from .transport import TransportConfig, TransportDivergedError, pushforward

__all__ = [
    "TrainConfig",
    "RunRecord",
    "model_drift",
    "scsi_train",
    "restore",
    "exact_affine_scsi",
]

LOSS_KINDS = ("drift", "combined")


@dataclass
class TrainConfig:
    """Outer/inner loop settings.

    outer_iters is the number of self-consistency iterations; inner_steps the
    number of SGD steps taken against each frozen transport map. With
    probability mix_p an endpoint pair uses the regenerated observation
    F(transport(y)); otherwise the original y. resample > 1 amortizes each
    backward transport across several independent (corruption, time, noise)
    draws.
    """

    schedule: Schedule
    transport: TransportConfig
    outer_iters: int = 1000
    inner_steps: int = 1
    mix_p: float = 0.9
    batch_size: int = 256
    resample: int = 1
    lr: float = 5e-4
    warmup: int = 500
    seed: int = 0
    loss: str | None = None

    def __post_init__(self):
        if self.outer_iters < 1:
            raise ValueError("outer_iters must be >= 1")
        if self.inner_steps < 1:
            raise ValueError("inner_steps must be >= 1")
        if not 0.0 <= self.mix_p <= 1.0:
            raise ValueError("mix_p must lie in [0, 1]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.resample < 1:
            raise ValueError("resample must be >= 1")
        if self.loss is None:
            self.loss = "drift" if self.transport.mode == "ode" else "combined"
        if self.loss not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.loss!r}; expected one of {LOSS_KINDS}")

    def checkpoint_cadence(self) -> int:
        k = self.outer_iters
        return 1 if k <= 100 else math.ceil(k / 100)


@dataclass
class RunRecord:
    """Per-outer-iteration summary row."""

    k: int
    mean_loss: float
    wall_time: float
    frac_regen: float
    w2: float = float("nan")
    param_err: float = float("nan")
    checkpoint: str = ""


def model_drift(model: Regressor):
    """Batch drift callable (t, X, latents) -> X-shaped output."""

    def drift(t, x, latents):
        return forward(model, x, t, latents if model.latent_dim > 0 else None)

    return drift


def _combined_target(i_dot, z, t, cfg: TrainConfig):
    eps = cfg.transport.epsilon
    if eps == 0.0:
        return i_dot
    if cfg.transport.eps_schedule == "gamma":
        return i_dot + eps * z
    g = cfg.schedule.gamma(t)
    if np.any(g <= 0.0):
        raise ValueError("combined loss with constant epsilon needs gamma(t) > 0 on the sampled times")
    return i_dot + (eps / g)[:, None] * z


def scsi_train(
    observations: np.ndarray,
    channel: ChannelSpec,
    cfg: TrainConfig,
    model: Regressor,
    latents: np.ndarray | None = None,
    metrics_fn=None,
    checkpoint_dir: str | None = None,
):
    """Run the self-consistency iteration; returns (model, records).

    observations: (n, d) corrupted samples; latents: per-observation channel
    latents when the channel emits them and the model conditions on them.
    metrics_fn(k, model) may return a dict with "w2" / "param_err" entries,
    evaluated at the checkpoint cadence. On transport divergence the run
    aborts and the model is rolled back to the last completed outer iteration.
    """
    observations = np.asarray(observations, dtype=float)
    if observations.ndim != 2 or observations.shape[0] == 0:
        raise ValueError("observations must be a nonempty (n, d) array")
    n_obs, d = observations.shape
    if model.latent_dim > 0:
        if latents is None:
            raise ValueError("model conditions on a latent but no observation latents were given")
        latents = np.asarray(latents, dtype=float)
        if latents.shape != (n_obs, model.latent_dim):
            raise ValueError(f"latents must have shape ({n_obs}, {model.latent_dim})")

    rng = np.random.default_rng(cfg.seed)
    opt = make_optimizer(
        model,
        lr_peak=cfg.lr,
        warmup_steps=cfg.warmup,
        total_steps=cfg.outer_iters * cfg.inner_steps,
    )
    sched = cfg.schedule
    t_lo, t_hi = cfg.transport.t_min, 1.0 - cfg.transport.t_min
    n_transport = math.ceil(cfg.batch_size / cfg.resample)
    cadence = cfg.checkpoint_cadence()
    records: list[RunRecord] = []
    last_good = clone_params(model)
    t_start = time.perf_counter()

    for k in range(1, cfg.outer_iters + 1):
        frozen = clone_params(model)
        drift = model_drift(frozen)
        idx = rng.integers(0, n_obs, size=cfg.inner_steps * n_transport)
        ys = observations[idx]
        ylats = latents[idx] if latents is not None else None
        try:
            xs = pushforward(
                drift,
                ys,
                latents=ylats,
                rng=rng,
                cfg=cfg.transport,
                sched=sched,
                denoiser=None,
            )
        except TransportDivergedError:
            model.weights = [w.copy() for w in last_good.weights]
            model.biases = [b.copy() for b in last_good.biases]
            break

        losses = []
        regen_total = 0
        row_total = 0
        for i in range(cfg.inner_steps):
            sl = slice(i * n_transport, (i + 1) * n_transport)
            x0 = np.repeat(xs[sl], cfg.resample, axis=0)[: cfg.batch_size]
            y0 = np.repeat(ys[sl], cfg.resample, axis=0)[: cfg.batch_size]
            y0_lat = (
                np.repeat(ylats[sl], cfg.resample, axis=0)[: cfg.batch_size]
                if ylats is not None
                else None
            )
            nb = x0.shape[0]
            fresh = apply_channel(channel, x0, rng)
            regen = rng.random(nb) < cfg.mix_p
            x1 = np.where(regen[:, None], fresh.y, y0)
            if model.latent_dim > 0:
                if fresh.latent is None:
                    raise ValueError("model conditions on a latent but the channel emits none")
                lat_obs = np.where(regen[:, None], fresh.latent, y0_lat)
            else:
                lat_obs = None
            regen_total += int(regen.sum())
            row_total += nb

            t = rng.uniform(t_lo, t_hi, size=nb)
            z = rng.standard_normal((nb, d))
            i_t, i_dot = interpolant_batch(x0, x1, t, z, sched)
            target = i_dot if cfg.loss == "drift" else _combined_target(i_dot, z, t, cfg)
            loss, grads = loss_and_grad(model, i_t, t, target, lat_obs)
            adam_step(model, opt, grads)
            losses.append(loss)

        last_good = clone_params(model)
        rec = RunRecord(
            k=k,
            mean_loss=float(np.mean(losses)),
            wall_time=time.perf_counter() - t_start,
            frac_regen=regen_total / max(row_total, 1),
        )
        if k % cadence == 0 or k == cfg.outer_iters:
            if metrics_fn is not None:
                extra = metrics_fn(k, model) or {}
                rec.w2 = float(extra.get("w2", float("nan")))
                rec.param_err = float(extra.get("param_err", float("nan")))
            if checkpoint_dir is not None:
                name = f"checkpoint_{k:06d}.npz"
                save_checkpoint(os.path.join(checkpoint_dir, name), model, step=opt.step)
                rec.checkpoint = name
        records.append(rec)

    return model, records


def restore(
    model: Regressor,
    transport_cfg: TransportConfig,
    observations: np.ndarray,
    sched: Schedule | None = None,
    latents: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Push observations backward through the learned transport map.

    Deterministic in ODE mode; SDE mode needs a generator and the schedule.
    """
    return pushforward(
        model_drift(model),
        np.asarray(observations, dtype=float),
        latents=latents,
        rng=rng,
        cfg=transport_cfg,
        sched=sched,
        denoiser=None,
    )


def exact_affine_scsi(
    truth: GaussianModel,
    init: GaussianModel,
    eps: float,
    outer_iters: int,
) -> list[GaussianModel]:
    """Self-consistency iteration with the regressor replaced by the exact
    affine drift family and the inner problem solved exactly.

    The model parameters are a Gaussian (mean, cov); one outer iteration
    (i) builds the reverse transport induced by the current parameters (the
    linear solution map plus its injected noise covariance), (ii) pushes the
    observation law N(mean*, cov* + I) through it in closed form, and
    (iii) reads the next parameters off the transported law, which is the
    exact minimizer of the drift regression over the affine family.

    Returns the trajectory [init, step1, step2, ...].
    """
    if outer_iters < 0:
        raise ValueError("outer_iters must be >= 0")
    eye = np.eye(truth.dim)
    obs_mean = truth.mean
    obs_cov = truth.cov + eye
    traj = [init]
    cur = init
    for _ in range(outer_iters):
        b = solution_map_B(cur, eps)
        noise = transport_noise_cov(cur, eps)
        new_mean = cur.mean + b @ (obs_mean - cur.mean)
        new_cov = b @ obs_cov @ b + noise
        cur = GaussianModel(mean=new_mean, cov=new_cov)
        traj.append(cur)
    return traj

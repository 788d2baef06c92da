"""Fully-connected regressor with sinusoidal time features and hand-written backprop.

The network maps [x | time-features(t) | latent] -> vector of x's dimension.
Reverse-mode gradients and the Adam update are implemented here directly on
numpy arrays; there is no autodiff framework underneath, which keeps runs
bitwise reproducible and the gradient path fully auditable.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

__all__ = [
    "Regressor",
    "OptimizerState",
    "make_regressor",
    "time_features",
    "forward",
    "loss_and_grad",
    "adam_step",
    "learning_rate_at",
    "make_optimizer",
    "save_checkpoint",
    "load_checkpoint",
    "clone_params",
    "param_count",
]

ACTIVATIONS = ("relu", "gelu", "tanh")

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "gelu":
        return 0.5 * z * (1.0 + erf(z / _SQRT2))
    if name == "tanh":
        return np.tanh(z)
    raise ValueError(f"unknown activation {name!r}")


def _act_grad(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (z > 0.0).astype(z.dtype)
    if name == "gelu":
        phi = _INV_SQRT_2PI * np.exp(-0.5 * z * z)
        return 0.5 * (1.0 + erf(z / _SQRT2)) + z * phi
    if name == "tanh":
        th = np.tanh(z)
        return 1.0 - th * th
    raise ValueError(f"unknown activation {name!r}")


@dataclass
class Regressor:
    """Dense network: weights[i] has shape (widths[i], widths[i+1]).

    Activations apply between layers; the final layer is linear. The input
    layout is [x | time-features | latent], so widths[0] must equal
    x_dim + time_embed_dim + latent_dim and widths[-1] equals x_dim.
    """

    widths: tuple[int, ...]
    activation: str
    time_embed_dim: int
    latent_dim: int
    max_freq: float
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def x_dim(self) -> int:
        return self.widths[-1]


def param_count(model: Regressor) -> int:
    return sum(w.size + b.size for w, b in zip(model.weights, model.biases))


def clone_params(model: Regressor) -> Regressor:
    """Deep-copied parameter snapshot; used to freeze the transport map."""
    return Regressor(
        widths=model.widths,
        activation=model.activation,
        time_embed_dim=model.time_embed_dim,
        latent_dim=model.latent_dim,
        max_freq=model.max_freq,
        weights=[w.copy() for w in model.weights],
        biases=[b.copy() for b in model.biases],
    )


def make_regressor(
    x_dim: int,
    hidden: tuple[int, ...] = (128, 128, 128),
    activation: str = "gelu",
    time_embed_dim: int = 32,
    latent_dim: int = 0,
    max_freq: float = 2.0,
    rng: np.random.Generator | None = None,
    zero_last: bool = True,
) -> Regressor:
    """Initialize with He-scaled hidden layers and (by default) a zero output layer.

    A zero output layer makes the induced transport map exactly the identity
    at initialization, so the initial restored distribution equals the
    observed one.
    """
    if activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}; expected one of {ACTIVATIONS}")
    if time_embed_dim % 2 != 0:
        raise ValueError("time_embed_dim must be even")
    rng = rng if rng is not None else np.random.default_rng(0)
    widths = (x_dim + time_embed_dim + latent_dim, *hidden, x_dim)
    weights, biases = [], []
    for i in range(len(widths) - 1):
        fan_in = widths[i]
        w = rng.standard_normal((widths[i], widths[i + 1])) * np.sqrt(2.0 / fan_in)
        if zero_last and i == len(widths) - 2:
            w = np.zeros_like(w)
        weights.append(w)
        biases.append(np.zeros(widths[i + 1]))
    return Regressor(
        widths=widths,
        activation=activation,
        time_embed_dim=time_embed_dim,
        latent_dim=latent_dim,
        max_freq=max_freq,
        weights=weights,
        biases=biases,
    )


def time_features(t, dim: int, max_freq: float) -> np.ndarray:
    """Sinusoidal features [sin(2 pi f_j t), cos(2 pi f_j t)] with f_j
    geometrically spaced in [1, max_freq]. t may be a scalar or (n,) array;
    output is (n, dim)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    half = dim // 2
    if half == 1:
        freqs = np.array([max_freq])
    else:
        freqs = np.geomspace(1.0, max_freq, half)
    ang = 2.0 * np.pi * t[:, None] * freqs[None, :]
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)


def _assemble(model: Regressor, x: np.ndarray, t, latent) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    n, d = xb.shape
    if d != model.x_dim:
        raise ValueError(f"input dimension {d} does not match model x_dim {model.x_dim}")
    tf = time_features(t, model.time_embed_dim, model.max_freq)
    if tf.shape[0] == 1 and n > 1:
        tf = np.broadcast_to(tf, (n, tf.shape[1]))
    if tf.shape[0] != n:
        raise ValueError(f"got {tf.shape[0]} times for {n} inputs")
    cols = [xb, tf]
    if model.latent_dim > 0:
        if latent is None:
            raise ValueError("model expects a latent but none was given")
        lb = np.asarray(latent, dtype=float)
        if lb.ndim == 1:
            lb = lb[None, :] if single else np.broadcast_to(lb[None, :], (n, lb.shape[0]))
        if lb.shape != (n, model.latent_dim):
            raise ValueError(f"latent shape {lb.shape} does not match (n, {model.latent_dim})")
        cols.append(lb)
    return np.concatenate(cols, axis=1), single


def _forward_cached(model: Regressor, inp: np.ndarray):
    pre = []
    h = inp
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ w + b
        if i < last:
            pre.append((h, z))
            h = _act(model.activation, z)
        else:
            pre.append((h, z))
            h = z
    return h, pre


def forward(model: Regressor, x: np.ndarray, t, latent=None) -> np.ndarray:
    """Evaluate the network. x: (d,) or (n, d); t: scalar or (n,)."""
    inp, single = _assemble(model, x, t, latent)
    out, _ = _forward_cached(model, inp)
    return out[0] if single else out


def loss_and_grad(model: Regressor, x: np.ndarray, t, target: np.ndarray, latent=None):
    """Mean squared residual over the batch and its gradient in all parameters.

    The residual is |f(x_i, t_i, latent_i) - target_i|^2 averaged over rows;
    gradients come from the layer-by-layer reverse pass.
    """
    inp, _ = _assemble(model, np.atleast_2d(x), t, latent)
    target = np.atleast_2d(np.asarray(target, dtype=float))
    if target.shape[0] == 0:
        raise ValueError("empty batch")
    out, cache = _forward_cached(model, inp)
    if out.shape != target.shape:
        raise ValueError(f"target shape {target.shape} does not match output {out.shape}")
    n = out.shape[0]
    diff = out - target
    loss = float(np.sum(diff * diff) / n)

    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.biases)
    delta = 2.0 * diff / n
    last = len(model.weights) - 1
    for i in range(last, -1, -1):
        h_in, z = cache[i]
        if i < last:
            delta = delta * _act_grad(model.activation, z)
        grads_w[i] = h_in.T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ model.weights[i].T
    return loss, (grads_w, grads_b)


@dataclass
class OptimizerState:
    """Adam moments plus a warmup-then-cosine learning-rate schedule.

    The learning rate is 0 at step 0, rises linearly to `lr_peak` at
    `warmup_steps`, then follows a half cosine down to `lr_min` at
    `total_steps`. With total_steps=None it stays at the peak.
    """

    m_w: list[np.ndarray]
    v_w: list[np.ndarray]
    m_b: list[np.ndarray]
    v_b: list[np.ndarray]
    step: int = 0
    lr_peak: float = 5e-4
    warmup_steps: int = 0
    total_steps: int | None = None
    lr_min: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def make_optimizer(
    model: Regressor,
    lr_peak: float = 5e-4,
    warmup_steps: int = 0,
    total_steps: int | None = None,
    lr_min: float = 0.0,
) -> OptimizerState:
    return OptimizerState(
        m_w=[np.zeros_like(w) for w in model.weights],
        v_w=[np.zeros_like(w) for w in model.weights],
        m_b=[np.zeros_like(b) for b in model.biases],
        v_b=[np.zeros_like(b) for b in model.biases],
        lr_peak=lr_peak,
        warmup_steps=warmup_steps,
        total_steps=total_steps,
        lr_min=lr_min,
    )


def learning_rate_at(opt: OptimizerState, step: int) -> float:
    if opt.warmup_steps > 0 and step < opt.warmup_steps:
        return opt.lr_peak * step / opt.warmup_steps
    if opt.total_steps is None or opt.total_steps <= opt.warmup_steps:
        return opt.lr_peak
    frac = (step - opt.warmup_steps) / (opt.total_steps - opt.warmup_steps)
    frac = min(max(frac, 0.0), 1.0)
    return opt.lr_min + 0.5 * (opt.lr_peak - opt.lr_min) * (1.0 + np.cos(np.pi * frac))


def adam_step(model: Regressor, opt: OptimizerState, grads) -> None:
    """One Adam update in place; the step counter advances afterwards."""
    grads_w, grads_b = grads
    lr = learning_rate_at(opt, opt.step)
    t = opt.step + 1
    c1 = 1.0 - opt.beta1**t
    c2 = 1.0 - opt.beta2**t
    for i in range(len(model.weights)):
        for p, g, m, v in (
            (model.weights[i], grads_w[i], opt.m_w[i], opt.v_w[i]),
            (model.biases[i], grads_b[i], opt.m_b[i], opt.v_b[i]),
        ):
            m *= opt.beta1
            m += (1.0 - opt.beta1) * g
            v *= opt.beta2
            v += (1.0 - opt.beta2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + opt.eps)
    opt.step = t


def save_checkpoint(path, model: Regressor, step: int = 0) -> None:
    """npz container with a json manifest; round-trips parameters bitwise."""
    manifest = json.dumps(
        {
            "widths": list(model.widths),
            "activation": model.activation,
            "time_embed_dim": model.time_embed_dim,
            "latent_dim": model.latent_dim,
            "max_freq": model.max_freq,
            "step": step,
        }
    )
    arrays = {f"w{i}": w for i, w in enumerate(model.weights)}
    arrays.update({f"b{i}": b for i, b in enumerate(model.biases)})
    np.savez(path, manifest=np.frombuffer(manifest.encode(), dtype=np.uint8), **arrays)


def load_checkpoint(path) -> tuple[Regressor, int]:
    with np.load(path) as data:
        manifest = json.loads(bytes(data["manifest"]).decode())
        n_layers = len(manifest["widths"]) - 1
        weights = [data[f"w{i}"] for i in range(n_layers)]
        biases = [data[f"b{i}"] for i in range(n_layers)]
    model = Regressor(
        widths=tuple(manifest["widths"]),
        activation=manifest["activation"],
        time_embed_dim=manifest["time_embed_dim"],
        latent_dim=manifest["latent_dim"],
        max_freq=manifest["max_freq"],
        weights=weights,
        biases=biases,
    )
    return model, manifest["step"]

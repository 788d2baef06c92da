"""Black-box stochastic corruption channels.

A channel is a conditional law y | x realized by `apply`; the training loop
is only allowed to draw samples from it. Outputs live in the same space as
the input. Some channels additionally emit an observable latent (e.g. the
mask pattern), which downstream models may condition on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["ChannelSpec", "ChannelOutput", "apply_channel", "compose", "CHANNEL_KINDS"]

CHANNEL_KINDS = ("awgn", "random-mask", "gaussian-blur-1d", "poisson", "compose")

FILL_KINDS = ("zero", "standard-gaussian")

# Sharpness of the smooth clip used to keep Poisson rates nonnegative.
# For rate arguments >= 1 the clip bias is below 5e-5.
_SOFTPLUS_SHARPNESS = 10.0


@dataclass(frozen=True)
class ChannelOutput:
    """One channel draw: the corrupted vector and the observable latent, if any."""

    y: np.ndarray
    latent: np.ndarray | None = None


@dataclass(frozen=True)
class ChannelSpec:
    """Channel kind plus its parameters.

    kinds and the parameters they read:
      "awgn":            sigma_n >= 0, additive N(0, sigma_n^2 I) noise.
      "random-mask":     rho in [0, 1], per-coordinate masking probability;
                         masked coordinates replaced per `fill`; the latent is
                         the binary mask (1 = masked).
      "gaussian-blur-1d": sigma_r > 0 kernel width; truncated discrete kernel
                         of radius ceil(3 sigma_r), normalized to sum 1, with
                         reflecting boundaries.
      "poisson":         lam_n > 0 scale: y = Poisson(lam_n * r(x)) / lam_n - shift
                         with r(x) a smooth clip of x + shift at zero, so the
                         mean is preserved wherever x + shift stays positive.
      "compose":         `parts` applied left to right; latents concatenated.
    """

    kind: str
    sigma_n: float = 0.0
    rho: float = 0.0
    sigma_r: float = 1.0
    lam_n: float = 1.0
    shift: float = 4.0
    fill: str = "standard-gaussian"
    parts: tuple["ChannelSpec", ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}; expected one of {CHANNEL_KINDS}")
        if self.sigma_n < 0:
            raise ValueError("sigma_n must be >= 0")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        if self.sigma_r <= 0:
            raise ValueError("sigma_r must be > 0")
        if self.lam_n <= 0:
            raise ValueError("lam_n must be > 0")
        if self.fill not in FILL_KINDS:
            raise ValueError(f"unknown fill {self.fill!r}; expected one of {FILL_KINDS}")
        if self.kind == "compose" and len(self.parts) < 2:
            raise ValueError("compose needs at least two parts")

    def latent_dim(self, x_dim: int) -> int:
        """Width of the latent emitted per draw (0 when none)."""
        if self.kind == "random-mask":
            return x_dim
        if self.kind == "compose":
            return sum(p.latent_dim(x_dim) for p in self.parts)
        return 0


def _blur_kernel(sigma_r: float) -> np.ndarray:
    radius = int(np.ceil(3.0 * sigma_r))
    offsets = np.arange(-radius, radius + 1)
    k = np.exp(-0.5 * (offsets / sigma_r) ** 2)
    return k / k.sum()


def _blur_1d(x: np.ndarray, sigma_r: float) -> np.ndarray:
    k = _blur_kernel(sigma_r)
    radius = (len(k) - 1) // 2
    # reflect-pad so a constant signal stays constant
    padded = np.pad(x, ((0, 0), (radius, radius)), mode="reflect") if x.ndim == 2 else np.pad(x, radius, mode="reflect")
    if x.ndim == 2:
        out = np.empty_like(x)
        for i in range(x.shape[0]):
            out[i] = np.convolve(padded[i], k, mode="valid")
        return out
    return np.convolve(padded, k, mode="valid")


def _smooth_clip(v: np.ndarray) -> np.ndarray:
    # sharp softplus: (1/k) log(1 + exp(k v)), numerically stable
    k = _SOFTPLUS_SHARPNESS
    return np.logaddexp(0.0, k * v) / k


def apply_channel(spec: ChannelSpec, x: np.ndarray, rng: np.random.Generator) -> ChannelOutput:
    """Draw once from the channel at x.

    Accepts a single vector (d,) or a batch (n, d); batches are corrupted
    row-wise with independent draws. Latents follow the same shape convention.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("channel input contains non-finite entries")
    single = x.ndim == 1
    xb = x[None, :] if single else x

    y, latent = _apply_batch(spec, xb, rng)

    if single:
        return ChannelOutput(y=y[0], latent=None if latent is None else latent[0])
    return ChannelOutput(y=y, latent=latent)


def _apply_batch(spec: ChannelSpec, xb: np.ndarray, rng: np.random.Generator):
    n, d = xb.shape
    if spec.kind == "awgn":
        y = xb if spec.sigma_n == 0.0 else xb + spec.sigma_n * rng.standard_normal((n, d))
        return np.array(y, copy=True), None
    if spec.kind == "random-mask":
        mask = (rng.random((n, d)) < spec.rho).astype(float)
        if spec.fill == "zero":
            fill = np.zeros((n, d))
        else:
            fill = rng.standard_normal((n, d))
        y = np.where(mask > 0, fill, xb)
        return y, mask
    if spec.kind == "gaussian-blur-1d":
        return _blur_1d(xb, spec.sigma_r), None
    if spec.kind == "poisson":
        rate = _smooth_clip(xb + spec.shift)
        counts = rng.poisson(spec.lam_n * rate)
        return counts / spec.lam_n - spec.shift, None
    if spec.kind == "compose":
        latents = []
        y = xb
        for part in spec.parts:
            y, lat = _apply_batch(part, y, rng)
            if lat is not None:
                latents.append(lat)
        latent = np.concatenate(latents, axis=1) if latents else None
        return y, latent
    raise ValueError(f"unknown channel kind {spec.kind!r}")


def compose(a: ChannelSpec, b: ChannelSpec) -> ChannelSpec:
    """Channel that first applies b, then a; latents are concatenated."""
    parts_b = b.parts if b.kind == "compose" else (b,)
    parts_a = a.parts if a.kind == "compose" else (a,)
    return ChannelSpec(kind="compose", parts=parts_b + parts_a)

"""Closed-form engine for the Gaussian prior / unit-variance AWGN case.

Everything here is exact linear algebra on symmetric matrices: affine scores,
solution maps of the reverse transport, the self-consistent covariance/mean
update and its expectation-maximization counterpart, convergence-rate
factors, Gaussian Wasserstein-2 and KL, the transport-cost functional, and
Wishart test matrices. All matrix functions act on commuting arguments of
the form f(Sigma) and are evaluated through a symmetric eigendecomposition
with eigenvalues clamped at zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GaussianModel",
    "SymmetricMatrixFunction",
    "gaussian_score",
    "solution_map_B",
    "solution_map_phi",
    "transport_noise_cov",
    "scsi_update",
    "em_update",
    "rate_factor",
    "gaussian_w2sq",
    "transport_cost_T",
    "gaussian_kl",
    "condition_ratio_check",
    "wishart_sample",
]

_SYM_TOL = 1e-10
_EIG_FLOOR = -1e-10


@dataclass(frozen=True)
class GaussianModel:
    """Mean vector and positive-semidefinite covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"covariance shape {cov.shape} does not match mean size {mean.size}")
        asym = np.max(np.abs(cov - cov.T)) if cov.size else 0.0
        scale = max(np.max(np.abs(cov)), 1.0)
        if asym > _SYM_TOL * scale:
            raise ValueError(f"covariance not symmetric (max asymmetry {asym:.3e})")
        w = np.linalg.eigvalsh(0.5 * (cov + cov.T))
        if w.min() < _EIG_FLOOR * scale - _SYM_TOL:
            raise ValueError(f"covariance not PSD (min eigenvalue {w.min():.3e})")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", 0.5 * (cov + cov.T))

    @property
    def dim(self) -> int:
        return self.mean.size


class SymmetricMatrixFunction:
    """Cached eigendecomposition of a symmetric matrix; applies scalar
    functions to the spectrum. Eigenvalues are clamped at zero so that
    fractional powers of nominally-PSD inputs stay real."""

    def __init__(self, a: np.ndarray):
        a = np.asarray(a, dtype=float)
        a = 0.5 * (a + a.T)
        w, q = np.linalg.eigh(a)
        self.matrix = a
        self.eigenvalues = np.maximum(w, 0.0)
        self.eigenvectors = q

    def apply(self, fn) -> np.ndarray:
        vals = fn(self.eigenvalues)
        return (self.eigenvectors * vals) @ self.eigenvectors.T

    def reconstruct(self) -> np.ndarray:
        return self.apply(lambda w: w)


def psd_sqrt(a: np.ndarray) -> np.ndarray:
    return SymmetricMatrixFunction(a).apply(np.sqrt)


def gaussian_score(t: float, x: np.ndarray, m: GaussianModel) -> np.ndarray:
    """Score of N(mean, cov + t I) at x: -(cov + t I)^{-1} (x - mean).

    Accepts a single point (d,) or a batch (n, d).
    """
    t = float(t)
    cov_t = m.cov + t * np.eye(m.dim)
    w = np.linalg.eigvalsh(cov_t)
    if w.min() <= 1e-12:
        raise ValueError(f"cov + t I singular at t={t} (min eigenvalue {w.min():.3e})")
    x = np.asarray(x, dtype=float)
    centered = x - m.mean
    return -np.linalg.solve(cov_t, centered.T).T


def solution_map_B(m: GaussianModel, eps: float) -> np.ndarray:
    """(cov (cov + I)^{-1})^{(1+eps)/2}: the end-to-end linear factor of the
    reverse transport for diffusion level eps."""
    f = SymmetricMatrixFunction(m.cov)
    p = 0.5 * (1.0 + eps)
    return f.apply(lambda w: (w / (w + 1.0)) ** p)


def solution_map_phi(m: GaussianModel, eps: float, t: float, s: float) -> np.ndarray:
    """Reverse-transport solution map from time s to time t (both in the
    measurement-to-data direction): (cov+(1-t)I)^{(1+eps)/2} (cov+(1-s)I)^{-(1+eps)/2}.

    At (t, s) = (1, 0) this reduces to solution_map_B.
    """
    f = SymmetricMatrixFunction(m.cov)
    p = 0.5 * (1.0 + eps)
    return f.apply(lambda w: ((w + 1.0 - t) / (w + 1.0 - s)) ** p)


def transport_noise_cov(m: GaussianModel, eps: float) -> np.ndarray:
    """Covariance injected by the stochastic part of the reverse transport:
    eps * int_0^1 Phi(1,s) Phi(1,s)^T ds = cov - B (cov + I) B in closed form.
    Zero when eps = 0."""
    b = solution_map_B(m, eps)
    return m.cov - b @ (m.cov + np.eye(m.dim)) @ b


def scsi_update(current: GaussianModel, truth: GaussianModel, eps: float) -> GaussianModel:
    """One outer iteration of the self-consistent scheme in the Gaussian case.

    mean <- mean_k + B_k (mean* - mean_k)
    cov  <- cov_k + B_k (cov* - cov_k) B_k,   B_k = (cov_k (cov_k+I)^{-1})^{(1+eps)/2}
    """
    b_k = solution_map_B(current, eps)
    new_mean = current.mean + b_k @ (truth.mean - current.mean)
    new_cov = current.cov + b_k @ (truth.cov - current.cov) @ b_k
    return GaussianModel(mean=new_mean, cov=new_cov)


def em_update(current: GaussianModel, truth: GaussianModel) -> GaussianModel:
    """Expectation-maximization covariance update for the centered case.

    cov <- cov_k + M_k (cov* - cov_k) M_k with M_k = cov_k (cov_k + I)^{-1}.
    Nonzero means are rejected: the posterior-resampling derivation assumes
    centered Gaussians.
    """
    if np.max(np.abs(current.mean)) > 1e-12 or np.max(np.abs(truth.mean)) > 1e-12:
        raise ValueError("em_update requires centered models (zero means)")
    f = SymmetricMatrixFunction(current.cov)
    m_k = f.apply(lambda w: w / (w + 1.0))
    new_cov = current.cov + m_k @ (truth.cov - current.cov) @ m_k
    return GaussianModel(mean=np.zeros(current.dim), cov=new_cov)


def rate_factor(eta: float, eps: float) -> float:
    """Per-iteration contraction factor 1 - eta^{1+eps} (1+eta)^{-1-eps}."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    return 1.0 - (eta / (1.0 + eta)) ** (1.0 + eps)


def gaussian_w2sq(a: np.ndarray, b: np.ndarray) -> float:
    """Squared Wasserstein-2 distance between centered Gaussians with
    covariances a and b: Tr(a + b - 2 (a^{1/2} b a^{1/2})^{1/2})."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ra = psd_sqrt(a)
    cross = psd_sqrt(ra @ b @ ra)
    val = float(np.trace(a) + np.trace(b) - 2.0 * np.trace(cross))
    return max(val, 0.0)


def transport_cost_T(a: np.ndarray, b: np.ndarray, eps: float = 0.0) -> float:
    """Mean squared gap between the two reverse-transport maps applied to the
    common observation law: Tr((T_a - T_b) (a + I) (T_a - T_b))."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = a.shape[0]
    t_a = solution_map_B(GaussianModel(mean=np.zeros(d), cov=a), eps)
    t_b = solution_map_B(GaussianModel(mean=np.zeros(d), cov=b), eps)
    diff = t_a - t_b
    val = float(np.trace(diff @ (a + np.eye(d)) @ diff))
    return max(val, 0.0)


def gaussian_kl(p: GaussianModel, q: GaussianModel) -> float:
    """KL(p || q) between Gaussians; q must have nonsingular covariance."""
    if p.dim != q.dim:
        raise ValueError("dimension mismatch")
    d = p.dim
    sign_q, logdet_q = np.linalg.slogdet(q.cov)
    if sign_q <= 0:
        raise ValueError("q covariance singular")
    sign_p, logdet_p = np.linalg.slogdet(p.cov)
    if sign_p <= 0:
        logdet_p = -np.inf
    q_inv_p = np.linalg.solve(q.cov, p.cov)
    dm = q.mean - p.mean
    quad = float(dm @ np.linalg.solve(q.cov, dm))
    val = 0.5 * (np.trace(q_inv_p) + quad - d + logdet_q - logdet_p)
    return float(max(val, 0.0))


def condition_ratio_check(truth: GaussianModel, candidate: GaussianModel):
    """Data-side-to-observation-side KL ratio and its spectral bound.

    ratio = KL(N(0,S) || N(0,S~)) / KL(N(0,S+I) || N(0,S~+I)),
    bound = (1 + 1/lambda_min(S))^2.
    Both models must be centered with positive-definite covariances. When the
    candidate equals the truth both divergences vanish and the ratio is 1 by
    convention (its limiting value is attained as candidate -> truth).
    """
    if np.max(np.abs(truth.mean)) > 1e-12 or np.max(np.abs(candidate.mean)) > 1e-12:
        raise ValueError("condition_ratio_check requires centered models")
    lam_min = float(np.linalg.eigvalsh(truth.cov).min())
    if lam_min <= 0 or np.linalg.eigvalsh(candidate.cov).min() <= 0:
        raise ValueError("covariances must be positive definite")
    bound = (1.0 + 1.0 / lam_min) ** 2
    eye = np.eye(truth.dim)
    num = gaussian_kl(truth, candidate)
    den = gaussian_kl(
        GaussianModel(mean=truth.mean, cov=truth.cov + eye),
        GaussianModel(mean=candidate.mean, cov=candidate.cov + eye),
    )
    if den == 0.0:
        return 1.0, bound
    return num / den, bound


def wishart_sample(d: int, dof: int, scale: float, rng: np.random.Generator) -> np.ndarray:
    """scale * G G^T / dof with G a (d, dof) standard Gaussian matrix."""
    if dof < d:
        raise ValueError("dof must be >= d")
    g = rng.standard_normal((d, dof))
    a = scale * (g @ g.T) / dof
    return 0.5 * (a + a.T)

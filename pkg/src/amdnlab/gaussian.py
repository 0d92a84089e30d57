"""Gaussian action heads: squashing, negative log-likelihood, and KL divergence.

The network emits four raw head values (safe mean, safe variance, unsafe mean,
unsafe variance). Means are squashed by tanh into the pedal range, variances by
nnelu with a floor that keeps every downstream log and division finite. The
array functions are the single implementation; the GaussParams wrappers are the
scalar surface used by policies and tests.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nnet import nnelu, nnelu_grad

VAR_FLOOR = 1e-6
LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class GaussParams:
    """One univariate Gaussian over pedal actions."""

    mu: float
    var: float

    def __post_init__(self):
        if not (-1.0 <= self.mu <= 1.0):
            raise ValueError(f"mu {self.mu} outside pedal range [-1, 1]")
        if self.var < VAR_FLOOR:
            raise ValueError(f"var {self.var} below floor {VAR_FLOOR}")


@dataclass(frozen=True)
class AmdnOutput:
    """Safe and unsafe action distributions for one observation."""

    safe: GaussParams
    unsafe: GaussParams


def squash_raw(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Map raw head outputs (..., 4) to (mu_s, var_s, mu_c, var_c) arrays."""
    raw = np.asarray(raw, dtype=float)
    if raw.shape[-1] != 4:
        raise ValueError(f"expected 4 raw head outputs, got shape {raw.shape}")
    mu_s = np.tanh(raw[..., 0])
    var_s = np.maximum(nnelu(raw[..., 1]), VAR_FLOOR)
    mu_c = np.tanh(raw[..., 2])
    var_c = np.maximum(nnelu(raw[..., 3]), VAR_FLOOR)
    return mu_s, var_s, mu_c, var_c


def squash_heads(raw) -> AmdnOutput:
    """Squash one 4-vector of raw head outputs into the two distributions."""
    mu_s, var_s, mu_c, var_c = squash_raw(np.asarray(raw, dtype=float).reshape(4))
    return AmdnOutput(GaussParams(float(mu_s), float(var_s)),
                      GaussParams(float(mu_c), float(var_c)))


def squash_grads(raw_mu, raw_var) -> tuple[np.ndarray, np.ndarray]:
    """d(squashed)/d(raw) for a mean/variance head pair, elementwise.

    The variance derivative is zero wherever the floor is engaged.
    """
    raw_mu = np.asarray(raw_mu, dtype=float)
    raw_var = np.asarray(raw_var, dtype=float)
    dmu = 1.0 - np.tanh(raw_mu) ** 2
    dvar = np.where(nnelu(raw_var) > VAR_FLOOR, nnelu_grad(raw_var), 0.0)
    return dmu, dvar


def nll_arrays(mu, var, a):
    """Elementwise Gaussian negative log-likelihood 0.5*ln(2*pi*var) + (a-mu)^2/(2*var)."""
    mu, var, a = (np.asarray(x, dtype=float) for x in (mu, var, a))
    return 0.5 * (LOG_2PI + np.log(var)) + (a - mu) ** 2 / (2.0 * var)


def nll_grad_arrays(mu, var, a):
    """Elementwise (d/dmu, d/dvar) of nll_arrays."""
    mu, var, a = (np.asarray(x, dtype=float) for x in (mu, var, a))
    d_mu = (mu - a) / var
    d_var = 1.0 / (2.0 * var) - (a - mu) ** 2 / (2.0 * var ** 2)
    return d_mu, d_var


def kl_arrays(mu_p, var_p, mu_q, var_q):
    """Elementwise KL divergence between univariate Gaussians, KL(p || q)."""
    mu_p, var_p, mu_q, var_q = (np.asarray(x, dtype=float) for x in (mu_p, var_p, mu_q, var_q))
    return 0.5 * np.log(var_q / var_p) + (var_p + (mu_p - mu_q) ** 2) / (2.0 * var_q) - 0.5


def kl_grad_p_arrays(mu_p, var_p, mu_q, var_q):
    """Elementwise (d/dmu_p, d/dvar_p) of kl_arrays; q is treated as constant."""
    mu_p, var_p, mu_q, var_q = (np.asarray(x, dtype=float) for x in (mu_p, var_p, mu_q, var_q))
    d_mu_p = (mu_p - mu_q) / var_q
    d_var_p = 1.0 / (2.0 * var_q) - 1.0 / (2.0 * var_p)
    return d_mu_p, d_var_p


def nll(g: GaussParams, a_hat: float) -> float:
    """Negative log-likelihood of a label action under one Gaussian head."""
    return float(nll_arrays(g.mu, g.var, a_hat))


def nll_grads(g: GaussParams, a_hat: float) -> tuple[float, float]:
    d_mu, d_var = nll_grad_arrays(g.mu, g.var, a_hat)
    return float(d_mu), float(d_var)


def kl_gauss(p: GaussParams, q: GaussParams) -> float:
    """Closed-form KL(p || q) for univariate Gaussians; >= 0, zero iff p == q."""
    return float(kl_arrays(p.mu, p.var, q.mu, q.var))


def kl_grads_p(p: GaussParams, q: GaussParams) -> tuple[float, float]:
    """Gradient of kl_gauss w.r.t. p only; the unsafe side takes no gradient."""
    d_mu_p, d_var_p = kl_grad_p_arrays(p.mu, p.var, q.mu, q.var)
    return float(d_mu_p), float(d_var_p)


def sample(g: GaussParams, rng: np.random.Generator) -> float:
    """Draw one action from the head distribution, clipped to the pedal range."""
    return float(np.clip(rng.normal(g.mu, np.sqrt(g.var)), -1.0, 1.0))

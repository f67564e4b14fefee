"""Bayesian post-processing of a noised within-tolerance count into a
posterior for r, the probability that a partition estimate lands in the
tolerance interval.

Model: the released value is Laplace(S, 1/epsilon) around the true count S,
S is Binomial(M, r), and r has a uniform prior.  The count conditional is
Beta(S+1, M-S+1); the S conditional is the discrete kernel combining the
Laplace and binomial terms, normalized directly over 0..M in log space.

Every conditional draw consumes exactly one uniform through an inverse
CDF, so a chain's trajectory depends only on its own seed.  That keeps
fixed-seed results portable and lets independent chains run vectorized in
lockstep (see :func:`gibbs_medians`).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import betaincinv, gammaln, logsumexp, xlogy

from .survey import SeedLike, _readonly

__all__ = [
    "PosteriorResult",
    "sample_r_given_s",
    "s_conditional_probs",
    "sample_s_given_r",
    "gibbs_posterior",
    "gibbs_medians",
    "oracle_posterior",
]

_R_LO = np.finfo(float).tiny
_R_HI = float(np.nextafter(1.0, 0.0))


@dataclass(frozen=True, eq=False)
class PosteriorResult:
    """Retained Gibbs draws of r with summary quantiles."""

    draws: np.ndarray
    median: float
    q05: float
    q25: float
    q75: float
    q95: float
    iters: int
    burnin: int

    def __post_init__(self):
        object.__setattr__(self, "draws", _readonly(self.draws))
        if self.iters <= self.burnin:
            raise ValueError("iters must exceed burnin")

    def to_json(self) -> str:
        return json.dumps(self.summary())

    def summary(self) -> dict:
        return {
            "median": self.median,
            "q05": self.q05,
            "q25": self.q25,
            "q75": self.q75,
            "q95": self.q95,
            "iters": self.iters,
            "burnin": self.burnin,
        }


def _log_count_kernel(s_noisy: np.ndarray, M: int, epsilon: np.ndarray) -> np.ndarray:
    """Log of the r-free part of the S conditional, shape (..., M+1):
    -epsilon*|s_noisy - S| - lgamma(S+1) - lgamma(M-S+1)."""
    s_grid = np.arange(M + 1, dtype=float)
    lap = -np.asarray(epsilon)[..., None] * np.abs(np.asarray(s_noisy)[..., None] - s_grid)
    return lap - gammaln(s_grid + 1.0) - gammaln(M - s_grid + 1.0)


def s_conditional_probs(
    r: float, s_noisy: float, M: int, epsilon: float
) -> np.ndarray:
    """Normalized distribution of the true count S on {0..M} given r and
    the released value."""
    if not 0.0 < r < 1.0:
        raise ValueError("r must lie strictly in (0, 1)")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    s_grid = np.arange(M + 1, dtype=float)
    logw = (
        _log_count_kernel(np.asarray(s_noisy), M, np.asarray(epsilon))
        + xlogy(s_grid, r)
        + xlogy(M - s_grid, 1.0 - r)
    )
    logw -= logw.max()
    w = np.exp(logw)
    return w / w.sum()


def sample_r_given_s(S: int, M: int, rng: np.random.Generator) -> float:
    """One draw from Beta(S+1, M-S+1), the conditional of r given the
    true count."""
    if not 0 <= S <= M:
        raise ValueError(f"count S={S} out of range 0..{M}")
    u = rng.random()
    r = float(betaincinv(S + 1.0, M - S + 1.0, u))
    return float(np.clip(r, _R_LO, _R_HI))


def sample_s_given_r(
    r: float, s_noisy: float, M: int, epsilon: float, rng: np.random.Generator
) -> int:
    """One draw of the true count S from its discrete conditional."""
    probs = s_conditional_probs(r, s_noisy, M, epsilon)
    cs = np.cumsum(probs)
    u = rng.random()
    return int(min(np.searchsorted(cs, u * cs[-1], side="left"), M))


def _run_chains(
    s_noisy: np.ndarray,
    M: int,
    epsilon: np.ndarray,
    iters: int,
    burnin: int,
    seeds: Sequence[SeedLike],
) -> np.ndarray:
    """Run independent Gibbs chains in lockstep; returns retained r draws,
    shape (len(seeds), iters - burnin).

    Each chain consumes two uniforms per iteration from its own generator
    (first the Beta inverse-CDF draw, then the count draw), so per-chain
    results do not depend on what else is in the batch.
    """
    C = len(seeds)
    s_noisy = np.broadcast_to(np.asarray(s_noisy, dtype=float), (C,))
    epsilon = np.broadcast_to(np.asarray(epsilon, dtype=float), (C,))
    if np.any(epsilon <= 0):
        raise ValueError("epsilon must be positive")
    if not iters > burnin >= 0:
        raise ValueError("need iters > burnin >= 0")

    s_grid = np.arange(M + 1, dtype=float)
    base = _log_count_kernel(s_noisy, M, epsilon)  # (C, M+1)
    u = np.stack([np.random.default_rng(s).random((iters, 2)) for s in seeds])
    S = np.clip(np.rint(s_noisy), 0, M)
    draws = np.empty((C, iters))
    for t in range(iters):
        r = betaincinv(S + 1.0, M - S + 1.0, u[:, t, 0])
        r = np.clip(r, _R_LO, _R_HI)
        logw = base + np.log(r)[:, None] * s_grid + np.log1p(-r)[:, None] * (M - s_grid)
        logw -= logw.max(axis=1, keepdims=True)
        w = np.exp(logw)
        cs = np.cumsum(w, axis=1)
        target = u[:, t, 1] * cs[:, -1]
        S = np.minimum((cs < target[:, None]).sum(axis=1), M)
        draws[:, t] = r
    return draws[:, burnin:]


def gibbs_posterior(
    s_noisy: float,
    M: int,
    epsilon: float,
    iters: int = 20000,
    burnin: int = 2000,
    seed: SeedLike = None,
) -> PosteriorResult:
    """Posterior for r given only the released noisy count.

    The chain starts from S = clamp(round(s_noisy), 0, M) and alternates
    the Beta draw of r with the discrete draw of S; draws after burnin are
    retained.
    """
    retained = _run_chains(s_noisy, M, epsilon, iters, burnin, [seed])[0]
    q05, q25, q50, q75, q95 = np.quantile(retained, [0.05, 0.25, 0.5, 0.75, 0.95])
    return PosteriorResult(
        draws=retained,
        median=float(q50),
        q05=float(q05),
        q25=float(q25),
        q75=float(q75),
        q95=float(q95),
        iters=iters,
        burnin=burnin,
    )


def gibbs_medians(
    s_noisy: Sequence[float],
    M: int,
    epsilon: float | Sequence[float],
    iters: int,
    burnin: int,
    seeds: Sequence[SeedLike],
    chunk: int = 512,
) -> np.ndarray:
    """Posterior medians for many independent verifications sharing M,
    computed as vectorized lockstep chains.  Equals running
    :func:`gibbs_posterior` per entry with the matching seed."""
    s_noisy = np.asarray(s_noisy, dtype=float)
    epsilon = np.broadcast_to(np.asarray(epsilon, dtype=float), s_noisy.shape)
    if len(seeds) != s_noisy.size:
        raise ValueError("need one seed per chain")
    out = np.empty(s_noisy.size)
    for lo in range(0, s_noisy.size, chunk):
        hi = min(lo + chunk, s_noisy.size)
        retained = _run_chains(
            s_noisy[lo:hi], M, epsilon[lo:hi], iters, burnin, list(seeds[lo:hi])
        )
        out[lo:hi] = np.median(retained, axis=1)
    return out


def oracle_posterior(
    s_noisy: float, M: int, epsilon: float, grid_size: int = 4000
) -> float:
    """Median of r under the exact marginal posterior, for validating the
    Gibbs sampler.

    Evaluates the unnormalized marginal (the Laplace-weighted mixture of
    Beta(S+1, M-S+1) kernels over S = 0..M) on a uniform grid over (0, 1),
    normalizes by the trapezoid rule, and inverts the CDF at one half.
    """
    if grid_size < 1000:
        raise ValueError("grid_size must be at least 1000")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    r = np.linspace(0.0, 1.0, grid_size)
    s_grid = np.arange(M + 1, dtype=float)
    logk = -epsilon * np.abs(s_noisy - s_grid) - gammaln(s_grid + 1.0) - gammaln(
        M - s_grid + 1.0
    )
    logdens = logsumexp(
        logk[None, :] + xlogy(s_grid, r[:, None]) + xlogy(M - s_grid, 1.0 - r[:, None]),
        axis=1,
    )
    dens = np.exp(logdens - logdens.max())
    cdf = cumulative_trapezoid(dens, r, initial=0.0)
    cdf /= cdf[-1]
    return float(np.interp(0.5, cdf, r))

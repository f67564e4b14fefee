"""Sub-sample-and-aggregate verification: partition the confidential
sample, compute inflated survey-weighted estimates per partition, count how
many land in the analyst's tolerance interval, and release a Laplace-noised
count."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .survey import EstimandKind, SeedLike, SurveySample, _readonly

__all__ = [
    "ToleranceKind",
    "IntervalMode",
    "ToleranceSpec",
    "PartitionScheme",
    "VerificationResult",
    "partition",
    "partition_estimate",
    "build_interval",
    "count_within",
    "privatize_count",
    "verify",
]


class ToleranceKind(str, Enum):
    SD_MULTIPLE = "sd_multiple"
    PROPORTIONAL = "proportional"


class IntervalMode(str, Enum):
    FIXED = "fixed"
    ADJUSTED = "adjusted"


@dataclass(frozen=True)
class ToleranceSpec:
    """Analyst's definition of "close enough".

    The half-width is alpha times the synthetic-data sd (SD_MULTIPLE) or
    alpha times |estimate| (PROPORTIONAL).  In ADJUSTED mode the width is
    further inflated by gamma, defaulting to sqrt(M) to track the larger
    variance of partition-level estimates; FIXED mode behaves as gamma = 1.
    """

    kind: ToleranceKind
    alpha: float
    mode: IntervalMode = IntervalMode.FIXED
    gamma: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ToleranceKind(self.kind))
        object.__setattr__(self, "mode", IntervalMode(self.mode))
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.gamma is not None and self.gamma < 1:
            raise ValueError("gamma must be at least 1")

    def width_factor(self, M: int) -> float:
        """gamma if ADJUSTED (default sqrt(M)), else 1."""
        if self.mode is IntervalMode.FIXED:
            return 1.0
        return self.gamma if self.gamma is not None else math.sqrt(M)


@dataclass(frozen=True, eq=False)
class PartitionScheme:
    """Disjoint balanced assignment of sample records to M partitions."""

    M: int
    assignment: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "assignment", _readonly(self.assignment, dtype=np.int64))
        if self.M < 1:
            raise ValueError("need at least one partition")
        if self.assignment.size < self.M:
            raise ValueError("more partitions than records")
        if self.assignment.min() < 0 or self.assignment.max() >= self.M:
            raise ValueError("assignment indices must lie in 0..M-1")
        sizes = np.bincount(self.assignment, minlength=self.M)
        if sizes.min() < 1:
            raise ValueError("every partition must get at least one record")
        if sizes.max() - sizes.min() > 1:
            raise ValueError("partition sizes may differ by at most one")
        object.__setattr__(self, "_sizes", _readonly(sizes, dtype=np.int64))

    @property
    def sizes(self) -> np.ndarray:
        return self._sizes

    @property
    def n(self) -> int:
        return int(self.assignment.size)


@dataclass(frozen=True)
class VerificationResult:
    """Released output: the noised count only, never the true count."""

    s_noisy: float
    M: int
    epsilon: float
    interval: tuple[float, float]

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        lo, hi = self.interval
        if lo > hi:
            raise ValueError("interval bounds out of order")

    def to_json(self) -> str:
        lo, hi = self.interval
        return json.dumps(
            {
                "s_noisy": self.s_noisy,
                "m": self.M,
                "epsilon": self.epsilon,
                "interval": {"lo": lo, "hi": hi},
            }
        )

    @classmethod
    def from_json(cls, payload: str) -> "VerificationResult":
        d = json.loads(payload)
        return cls(
            s_noisy=d["s_noisy"],
            M=d["m"],
            epsilon=d["epsilon"],
            interval=(d["interval"]["lo"], d["interval"]["hi"]),
        )


def partition(sample: SurveySample, M: int, seed: SeedLike) -> PartitionScheme:
    """Uniformly random balanced partition into M disjoint subsets.

    When M does not divide n, the n mod M leftover records land one per
    partition, so sizes differ by at most one.  Deterministic given seed.
    """
    if M < 2:
        raise ValueError("need at least 2 partitions")
    if M > sample.n:
        raise ValueError(f"cannot split {sample.n} records into {M} partitions")
    rng = np.random.default_rng(seed)
    order = rng.permutation(sample.n)
    assignment = np.empty(sample.n, dtype=np.int64)
    assignment[order] = np.arange(sample.n) % M
    return PartitionScheme(M=M, assignment=assignment)


def partition_estimate(
    sample: SurveySample, scheme: PartitionScheme, k: int, kind: EstimandKind
) -> float:
    """Survey-weighted estimate from partition k alone, with every weight
    inflated by n/n_k (the actual partition size, so the factor is exact).

    For the mean the inflation cancels in the ratio; it is applied anyway
    to keep the two estimands on the same weighted form.
    """
    if scheme.n != sample.n:
        raise ValueError("partition scheme does not match the sample")
    if not 0 <= k < scheme.M:
        raise ValueError(f"partition index {k} out of range for M={scheme.M}")
    members = scheme.assignment == k
    inflation = sample.n / int(scheme.sizes[k])
    wi = sample.w[members] * inflation
    xi = sample.x[members]
    kind = EstimandKind(kind)
    if kind is EstimandKind.TOTAL:
        return float(np.sum(wi * xi))
    return float(np.sum(wi * xi) / np.sum(wi))


def build_interval(
    estimate0: float, sd0: float, spec: ToleranceSpec, M: int
) -> tuple[float, float]:
    """Tolerance interval centered on the synthetic-data estimate."""
    if sd0 < 0:
        raise ValueError("sd0 must be nonnegative")
    g = spec.width_factor(M)
    if spec.kind is ToleranceKind.SD_MULTIPLE:
        half = g * spec.alpha * sd0
    else:
        half = g * spec.alpha * abs(estimate0)
    return (estimate0 - half, estimate0 + half)


def count_within(estimates: Sequence[float], interval: tuple[float, float]) -> int:
    """Number of estimates inside the closed interval [lo, hi]."""
    lo, hi = interval
    e = np.asarray(estimates, dtype=float)
    return int(np.count_nonzero((e >= lo) & (e <= hi)))


def privatize_count(S: float, epsilon: float, u: float) -> float:
    """Add Laplace(0, 1/epsilon) noise to the count via inverse-CDF
    sampling from the single uniform u, assuming unit global sensitivity
    (one changed record moves the count by at most one).

    Exactly one uniform is consumed, so fixed-seed outputs are portable.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if not 0.0 < u < 1.0:
        raise ValueError("u must lie strictly in (0, 1)")
    centered = u - 0.5
    eta = -(1.0 / epsilon) * math.copysign(1.0, centered) * math.log1p(-2.0 * abs(centered))
    return S + eta


def verify(
    conf: SurveySample,
    estimate0: float,
    sd0: float,
    kind: EstimandKind,
    spec: ToleranceSpec,
    M: int,
    epsilon: float,
    seed: SeedLike,
) -> VerificationResult:
    """End-to-end verification measure on the confidential sample.

    All randomness derives from one seed through two documented
    sub-streams: child 0 shuffles the partition, child 1 draws the Laplace
    uniform.  The true within-interval count never leaves this function.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    part_ss, noise_ss = ss.spawn(2)
    scheme = partition(conf, M, part_ss)
    estimates = [partition_estimate(conf, scheme, k, kind) for k in range(M)]
    interval = build_interval(estimate0, sd0, spec, M)
    s_true = count_within(estimates, interval)
    noise_rng = np.random.default_rng(noise_ss)
    u = noise_rng.random()
    while u == 0.0:  # keep the uniform strictly inside (0, 1)
        u = noise_rng.random()
    s_noisy = privatize_count(s_true, epsilon, u)
    return VerificationResult(s_noisy=s_noisy, M=M, epsilon=epsilon, interval=interval)

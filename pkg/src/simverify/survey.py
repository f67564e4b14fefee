"""Finite populations, probability-proportional-to-size sampling, and
survey-weighted estimation of totals and means."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence, Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator]

__all__ = [
    "EstimandKind",
    "PopulationModel",
    "Population",
    "SurveySample",
    "generate_population",
    "compute_inclusion_probabilities",
    "draw_pps_sample",
    "horvitz_thompson_total",
    "ratio_mean",
    "srs_estimate",
    "population_to_csv",
    "population_from_csv",
    "sample_to_csv",
    "sample_from_csv",
]


class EstimandKind(str, Enum):
    """Population quantity a survey estimate targets."""

    TOTAL = "total"
    MEAN = "mean"


def _readonly(a: np.ndarray, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PopulationModel:
    """Generative model for (z, x) pairs.

    z is drawn uniformly on (z_low, z_high) and x | z is normal with mean
    z + x_shift.  ``x_spread`` is read as a variance by default; set
    ``spread_is_sd`` to treat it as a standard deviation instead.
    ``fixed_z`` bypasses the uniform draw entirely (length must match N).
    """

    z_low: float = 0.0
    z_high: float = 10.0
    x_shift: float = 5.0
    x_spread: float = 2.0
    spread_is_sd: bool = False
    fixed_z: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.z_low < 0 or self.z_high <= self.z_low:
            raise ValueError("size variable range must satisfy 0 <= z_low < z_high")
        if self.x_spread < 0:
            raise ValueError("x_spread must be nonnegative")
        if self.fixed_z is not None and any(z <= 0 for z in self.fixed_z):
            raise ValueError("fixed_z values must be positive")

    @property
    def x_sd(self) -> float:
        return self.x_spread if self.spread_is_sd else float(np.sqrt(self.x_spread))

    @property
    def x_mean_of_z(self) -> float:
        """E[x] under the uniform z draw."""
        return (self.z_low + self.z_high) / 2.0 + self.x_shift


#: z ~ Uniform(0, 10), x | z ~ Normal(z + 5, variance 2).
DEFAULT_MODEL = PopulationModel()


@dataclass(frozen=True, eq=False)
class Population:
    """Finite population of (x, z) pairs; unit ids are implicit 0..N-1."""

    x: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _readonly(self.x))
        object.__setattr__(self, "z", _readonly(self.z))
        if self.x.ndim != 1 or self.x.shape != self.z.shape:
            raise ValueError("x and z must be 1-d arrays of equal length")
        if np.any(self.z <= 0):
            raise ValueError("size variable z must be strictly positive")

    @property
    def N(self) -> int:
        return int(self.x.size)

    @property
    def total(self) -> float:
        return float(np.sum(self.x))

    @property
    def mean(self) -> float:
        return self.total / self.N


@dataclass(frozen=True, eq=False)
class SurveySample:
    """Records drawn from a finite population with known inclusion
    probabilities.  Base weights are w = 1/pi, stored exactly as that
    float division."""

    ids: np.ndarray
    x: np.ndarray
    pi: np.ndarray
    N: int

    def __post_init__(self):
        object.__setattr__(self, "ids", _readonly(self.ids, dtype=np.int64))
        object.__setattr__(self, "x", _readonly(self.x))
        object.__setattr__(self, "pi", _readonly(self.pi))
        if not (self.ids.shape == self.x.shape == self.pi.shape):
            raise ValueError("ids, x, pi must have equal length")
        if np.any(self.pi <= 0) or np.any(self.pi > 1):
            raise ValueError("inclusion probabilities must lie in (0, 1]")
        if self.N < self.ids.size:
            raise ValueError("sample cannot exceed the population size")
        object.__setattr__(self, "_w", _readonly(1.0 / self.pi))

    @property
    def w(self) -> np.ndarray:
        return self._w

    @property
    def n(self) -> int:
        return int(self.ids.size)


def generate_population(
    N: int, seed: SeedLike, model: PopulationModel | None = None
) -> Population:
    """Generate a finite population from the configured model.

    Deterministic given (N, seed, model).

    Parameters
    ----------
    N : population size, at least 2.
    seed : RNG seed; each call owns its own stream.
    model : generative model; defaults to z ~ U(0, 10), x|z ~ N(z+5, 2).
    """
    if N < 2:
        raise ValueError("population size must be at least 2")
    model = model or DEFAULT_MODEL
    rng = np.random.default_rng(seed)
    if model.fixed_z is not None:
        if len(model.fixed_z) != N:
            raise ValueError("fixed_z length must equal N")
        z = np.asarray(model.fixed_z, dtype=float)
    else:
        z = rng.uniform(model.z_low, model.z_high, size=N)
        while np.any(z <= 0):  # open-interval guard when z_low == 0
            bad = z <= 0
            z[bad] = rng.uniform(model.z_low, model.z_high, size=int(bad.sum()))
    x = z + model.x_shift
    if model.x_sd > 0:
        x = x + rng.normal(0.0, model.x_sd, size=N)
    return Population(x=x, z=z)


def compute_inclusion_probabilities(z: Sequence[float], n: int) -> np.ndarray:
    """First-order inclusion probabilities for PPS sampling of n units.

    Starts from n*z_i/sum(z).  Any value exceeding 1 marks a certainty
    unit (pi = 1); the remaining probabilities are recomputed with the
    reduced sample size over the non-certainty sizes, iterating until no
    new certainties appear.  The result sums to n.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size == 0:
        raise ValueError("z must be a nonempty 1-d array")
    if np.any(z <= 0):
        raise ValueError("size variable z must be strictly positive")
    if not 1 <= n <= z.size:
        raise ValueError(f"sample size n={n} must satisfy 1 <= n <= N={z.size}")

    pi = np.ones(z.size)
    certain = np.zeros(z.size, dtype=bool)
    while True:
        rest = np.flatnonzero(~certain)
        if rest.size == 0:
            break
        m = n - int(certain.sum())
        raw = m * z[rest] / z[rest].sum()
        over = raw > 1.0
        if not over.any():
            pi[rest] = raw
            break
        certain[rest[over]] = True
    return pi


def draw_pps_sample(pop: Population, n: int, seed: SeedLike) -> SurveySample:
    """Draw a fixed-size PPS sample without replacement.

    Uses randomized systematic selection: the frame is put in uniformly
    random order, then a systematic pass over the cumulated inclusion
    probabilities picks the units hit by n points spaced one apart.  Each
    unit's realized inclusion probability equals its computed pi, and
    certainty units are always selected.  Deterministic given seed.
    """
    pi = compute_inclusion_probabilities(pop.z, n)
    rng = np.random.default_rng(seed)
    order = rng.permutation(pop.N)
    cum = np.cumsum(pi[order])
    points = rng.random() + np.arange(n)
    pos = np.searchsorted(cum, points, side="left")
    pos = np.minimum(pos, pop.N - 1)  # cum[-1] = n only up to rounding
    chosen = np.sort(order[pos])
    if np.unique(chosen).size != n:
        raise RuntimeError("systematic selection produced duplicate units")
    return SurveySample(ids=chosen, x=pop.x[chosen], pi=pi[chosen], N=pop.N)


def horvitz_thompson_total(sample: SurveySample) -> float:
    """Survey-weighted estimate of the population total, sum of w_i * x_i."""
    if sample.n == 0:
        raise ValueError("cannot estimate from an empty sample")
    return float(np.sum(sample.w * sample.x))


def ratio_mean(sample: SurveySample, inflation: float = 1.0) -> float:
    """Survey-weighted ratio estimate of the population mean.

    ``inflation`` multiplies every weight (the full-to-partition factor
    n/n_k); it cancels algebraically and is kept only so partition-level
    calls mirror the weighted-total form.
    """
    if sample.n == 0:
        raise ValueError("cannot estimate from an empty sample")
    if inflation <= 0:
        raise ValueError("inflation factor must be positive")
    wi = sample.w * inflation
    return float(np.sum(wi * sample.x) / np.sum(wi))


def srs_estimate(
    synth_x: Sequence[float], N: int, kind: EstimandKind
) -> tuple[float, float]:
    """Point estimate and standard deviation an analyst computes from a
    simple random sample of size n0 representing a population of size N.

    Total:  N * xbar,  variance N^2 (1 - n0/N) s^2 / n0
    Mean:   xbar,      variance (1 - n0/N) s^2 / n0

    Returns (estimate, sd).
    """
    x = np.asarray(synth_x, dtype=float)
    n0 = x.size
    if n0 < 2:
        raise ValueError("need at least 2 values to estimate a variance")
    if n0 > N:
        raise ValueError("sample size cannot exceed the population size")
    xbar = float(np.mean(x))
    s2 = float(np.var(x, ddof=1))
    fpc = 1.0 - n0 / N
    var_mean = fpc * s2 / n0
    kind = EstimandKind(kind)
    if kind is EstimandKind.TOTAL:
        return N * xbar, float(N * np.sqrt(var_mean))
    return xbar, float(np.sqrt(var_mean))


# ---------------------------------------------------------------------------
# CSV interchange (population: id,x,z; sample: id,x,pi,w), ordered by id.
# ---------------------------------------------------------------------------


def population_to_csv(pop: Population, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "x", "z"])
        for i in range(pop.N):
            writer.writerow([i, repr(float(pop.x[i])), repr(float(pop.z[i]))])


def population_from_csv(path: str | Path) -> Population:
    ids, xs, zs = [], [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["id", "x", "z"]:
            raise ValueError(f"expected header id,x,z, got {reader.fieldnames}")
        for row in reader:
            ids.append(int(row["id"]))
            xs.append(float(row["x"]))
            zs.append(float(row["z"]))
    order = np.argsort(ids)
    if not np.array_equal(np.asarray(ids)[order], np.arange(len(ids))):
        raise ValueError("population ids must be contiguous 0..N-1")
    return Population(x=np.asarray(xs)[order], z=np.asarray(zs)[order])


def sample_to_csv(sample: SurveySample, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "x", "pi", "w"])
        for i in range(sample.n):
            writer.writerow(
                [
                    int(sample.ids[i]),
                    repr(float(sample.x[i])),
                    repr(float(sample.pi[i])),
                    repr(float(sample.w[i])),
                ]
            )


def sample_from_csv(path: str | Path, N: int) -> SurveySample:
    """Read a sample written by :func:`sample_to_csv`.  N is not stored in
    the CSV and must be supplied."""
    ids, xs, pis = [], [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["id", "x", "pi", "w"]:
            raise ValueError(f"expected header id,x,pi,w, got {reader.fieldnames}")
        for row in reader:
            ids.append(int(row["id"]))
            xs.append(float(row["x"]))
            pis.append(float(row["pi"]))
    order = np.argsort(ids)
    return SurveySample(
        ids=np.asarray(ids, dtype=np.int64)[order],
        x=np.asarray(xs)[order],
        pi=np.asarray(pis)[order],
        N=N,
    )

"""Synthetic-data generators used in the repeated-sampling studies: a
faithful simple-random-sample synthesizer and a design-ignoring normal
synthesizer fit to the unweighted confidential sample."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .survey import Population, SeedLike, SurveySample, _readonly

__all__ = [
    "SynthesisMethod",
    "SyntheticData",
    "synthesize_srs",
    "synthesize_biased",
    "synthetic_to_csv",
    "synthetic_from_csv",
]


class SynthesisMethod(str, Enum):
    FAITHFUL_SRS = "faithful_srs"
    BIASED_NORMAL = "biased_normal"


@dataclass(frozen=True, eq=False)
class SyntheticData:
    """Released synthetic values; downstream estimation always treats them
    as a simple random sample with weight N/n0."""

    x: np.ndarray
    N: int
    provenance: SynthesisMethod

    def __post_init__(self):
        object.__setattr__(self, "x", _readonly(self.x))
        object.__setattr__(self, "provenance", SynthesisMethod(self.provenance))
        if self.x.size > self.N:
            raise ValueError("synthetic sample cannot exceed the population size")

    @property
    def n0(self) -> int:
        return int(self.x.size)


def synthesize_srs(pop: Population, n_0: int, seed: SeedLike) -> SyntheticData:
    """Faithful synthesizer: a uniform without-replacement draw of x values
    from the population itself.  Deterministic given seed."""
    if not 1 <= n_0 <= pop.N:
        raise ValueError(f"n_0={n_0} must satisfy 1 <= n_0 <= N={pop.N}")
    rng = np.random.default_rng(seed)
    idx = rng.choice(pop.N, size=n_0, replace=False)
    return SyntheticData(x=pop.x[idx], N=pop.N, provenance=SynthesisMethod.FAITHFUL_SRS)


def synthesize_biased(conf: SurveySample, n_0: int, seed: SeedLike) -> SyntheticData:
    """Design-ignoring synthesizer: i.i.d. normal draws matching the
    unweighted sample mean and variance (n-1 denominator) of the
    confidential x values."""
    if conf.n < 2:
        raise ValueError("need at least 2 confidential records")
    if n_0 < 1:
        raise ValueError("n_0 must be positive")
    mean = float(np.mean(conf.x))
    sd = float(np.std(conf.x, ddof=1))
    rng = np.random.default_rng(seed)
    draws = rng.normal(mean, sd, size=n_0)
    return SyntheticData(x=draws, N=conf.N, provenance=SynthesisMethod.BIASED_NORMAL)


def synthetic_to_csv(data: SyntheticData, path: str | Path) -> None:
    """Write values as a single-column CSV plus a JSON sidecar
    (same stem, .json suffix) carrying {n0, N, provenance}."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x"])
        for v in data.x:
            writer.writerow([repr(float(v))])
    sidecar = {"n0": data.n0, "N": data.N, "provenance": data.provenance.value}
    path.with_suffix(".json").write_text(json.dumps(sidecar))


def synthetic_from_csv(path: str | Path) -> SyntheticData:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["x"]:
            raise ValueError(f"expected single-column header x, got {reader.fieldnames}")
        xs = [float(row["x"]) for row in reader]
    meta = json.loads(path.with_suffix(".json").read_text())
    if meta["n0"] != len(xs):
        raise ValueError("sidecar n0 does not match the number of values")
    return SyntheticData(
        x=np.asarray(xs), N=int(meta["N"]), provenance=SynthesisMethod(meta["provenance"])
    )

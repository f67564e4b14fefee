"""Repeated-sampling simulation harness: draws confidential PPS samples and
synthetic data over a parameter grid, runs the private verification
measure next to the trusted full-data indicator, and emits analysis-ready
CSV.

Unlike the verification server, the harness is a research tool with access
to confidential intermediates; columns holding them carry a trusted_
prefix.

Seed scheme (all derived from base_seed, so partial re-runs reproduce):
  population        SeedSequence([base_seed, 0])
  (D, D0) pair      SeedSequence([base_seed, 1, nk_idx, M_idx, synth_idx, rep])
                    spawned into (sample draw, synthesis) streams; the pair
                    is shared by every cell that differs only in estimand,
                    interval mode, or alpha
  verification row  SeedSequence([base_seed, 2, cell_index, rep]) spawned
                    into (verify, gibbs) streams
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .posterior import gibbs_medians
from .survey import (
    EstimandKind,
    Population,
    SurveySample,
    draw_pps_sample,
    generate_population,
    horvitz_thompson_total,
    ratio_mean,
    srs_estimate,
)
from .synthesis import SynthesisMethod, synthesize_biased, synthesize_srs
from .verification import (
    IntervalMode,
    PartitionScheme,
    ToleranceKind,
    ToleranceSpec,
    build_interval,
    count_within,
    partition_estimate,
    privatize_count,
    verify,
)

__all__ = [
    "ExperimentConfig",
    "ReplicateRow",
    "CSV_HEADER",
    "PRESETS",
    "run_experiment",
    "compute_r_full",
    "summarize",
    "write_rows",
    "read_rows",
    "write_summary",
    "run_indicator_diagnostic",
]

CSV_HEADER = [
    "cell_id",
    "rep",
    "N",
    "n_k",
    "M",
    "alpha",
    "epsilon",
    "interval_mode",
    "synth_mode",
    "estimand",
    "trusted_tau_true",
    "trusted_tau_hat",
    "tau0_hat",
    "sd0",
    "trusted_Q",
    "s_noisy",
    "posterior_median",
]

SUMMARY_HEADER = [
    "cell_id",
    "N",
    "n_k",
    "M",
    "alpha",
    "epsilon",
    "interval_mode",
    "synth_mode",
    "estimand",
    "reps",
    "r_full",
    "pm_q25",
    "pm_median",
    "pm_q75",
]


@dataclass(frozen=True)
class ExperimentConfig:
    N: int
    reps: int
    nk_grid: tuple[int, ...]
    M_grid: tuple[int, ...]
    alpha_grid: tuple[float, ...]
    epsilon: float = 1.0
    interval_modes: tuple[IntervalMode, ...] = (IntervalMode.FIXED, IntervalMode.ADJUSTED)
    synth_modes: tuple[SynthesisMethod, ...] = (
        SynthesisMethod.FAITHFUL_SRS,
        SynthesisMethod.BIASED_NORMAL,
    )
    estimands: tuple[EstimandKind, ...] = (EstimandKind.TOTAL, EstimandKind.MEAN)
    base_seed: int = 20260810
    gibbs_iters: int = 20000
    gibbs_burnin: int = 2000

    def __post_init__(self):
        object.__setattr__(self, "nk_grid", tuple(int(v) for v in self.nk_grid))
        object.__setattr__(self, "M_grid", tuple(int(v) for v in self.M_grid))
        object.__setattr__(self, "alpha_grid", tuple(float(v) for v in self.alpha_grid))
        object.__setattr__(
            self, "interval_modes", tuple(IntervalMode(v) for v in self.interval_modes)
        )
        object.__setattr__(
            self, "synth_modes", tuple(SynthesisMethod(v) for v in self.synth_modes)
        )
        object.__setattr__(
            self, "estimands", tuple(EstimandKind(v) for v in self.estimands)
        )
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not self.nk_grid or min(self.nk_grid) < 1:
            raise ValueError("nk_grid must hold positive partition sizes")
        if not self.M_grid or min(self.M_grid) < 1:
            raise ValueError("M_grid must hold positive partition counts")
        if not self.alpha_grid or min(self.alpha_grid) <= 0:
            raise ValueError("alpha_grid must hold positive widths")
        if self.gibbs_iters <= self.gibbs_burnin or self.gibbs_burnin < 0:
            raise ValueError("need gibbs_iters > gibbs_burnin >= 0")
        for nk in self.nk_grid:
            for M in self.M_grid:
                if nk * M > self.N:
                    raise ValueError(
                        f"grid cell n_k={nk}, M={M} needs n={nk * M} > N={self.N}"
                    )

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "reps": self.reps,
            "nk_grid": list(self.nk_grid),
            "M_grid": list(self.M_grid),
            "alpha_grid": list(self.alpha_grid),
            "epsilon": self.epsilon,
            "interval_modes": [m.value for m in self.interval_modes],
            "synth_modes": [m.value for m in self.synth_modes],
            "estimands": [e.value for e in self.estimands],
            "base_seed": self.base_seed,
            "gibbs_iters": self.gibbs_iters,
            "gibbs_burnin": self.gibbs_burnin,
        }

    def cells(self) -> list[dict]:
        """Full grid in enumeration order; cell_id is the position here."""
        out = []
        for i_nk, nk in enumerate(self.nk_grid):
            for i_m, M in enumerate(self.M_grid):
                for i_s, synth in enumerate(self.synth_modes):
                    for estimand in self.estimands:
                        for mode in self.interval_modes:
                            for alpha in self.alpha_grid:
                                out.append(
                                    {
                                        "cell_id": len(out),
                                        "n_k": nk,
                                        "M": M,
                                        "alpha": alpha,
                                        "interval_mode": mode,
                                        "synth_mode": synth,
                                        "estimand": estimand,
                                        "pair_key": (i_nk, i_m, i_s),
                                    }
                                )
        return out


PRESETS = {
    # Reduced scale that runs on a desk in minutes.
    "desk": ExperimentConfig(
        N=200_000,
        reps=50,
        nk_grid=(100, 500),
        M_grid=(25, 50),
        alpha_grid=(1.0, 3.0, 5.0),
    ),
    # The published study design; hours of compute, not for CI.
    "paper": ExperimentConfig(
        N=10_000_000,
        reps=200,
        nk_grid=(500, 20_000, 50_000),
        M_grid=(25, 50, 90),
        alpha_grid=(1.0, 3.0, 5.0),
    ),
}


@dataclass(frozen=True)
class ReplicateRow:
    cell_id: int
    rep: int
    N: int
    n_k: int
    M: int
    alpha: float
    epsilon: float
    interval_mode: IntervalMode
    synth_mode: SynthesisMethod
    estimand: EstimandKind
    trusted_tau_true: float
    trusted_tau_hat: float
    tau0_hat: float
    sd0: float
    trusted_Q: int
    s_noisy: float
    posterior_median: float

    def as_csv(self) -> list[str]:
        return [
            str(self.cell_id),
            str(self.rep),
            str(self.N),
            str(self.n_k),
            str(self.M),
            repr(self.alpha),
            repr(self.epsilon),
            self.interval_mode.value,
            self.synth_mode.value,
            self.estimand.value,
            repr(self.trusted_tau_true),
            repr(self.trusted_tau_hat),
            repr(self.tau0_hat),
            repr(self.sd0),
            str(self.trusted_Q),
            repr(self.s_noisy),
            repr(self.posterior_median),
        ]


def _pair_streams(config: ExperimentConfig, pair_key: tuple, rep: int):
    ss = np.random.SeedSequence([config.base_seed, 1, *pair_key, rep])
    return ss.spawn(2)


def _row_streams(config: ExperimentConfig, cell_id: int, rep: int):
    ss = np.random.SeedSequence([config.base_seed, 2, cell_id, rep])
    return ss.spawn(2)


def _trusted_estimate(sample: SurveySample, estimand: EstimandKind) -> float:
    if estimand is EstimandKind.TOTAL:
        return horvitz_thompson_total(sample)
    return ratio_mean(sample)


def run_experiment(config: ExperimentConfig, threads: int = 1) -> list[ReplicateRow]:
    """Run the full grid; returns rows ordered by (cell_id, rep).

    Row count is reps * |grid|.  Replicates may execute in parallel; rows
    are assembled in deterministic order regardless of completion order,
    and every random quantity derives from the documented seed scheme.
    """
    pop = generate_population(config.N, np.random.SeedSequence([config.base_seed, 0]))
    tau = pop.total
    truth = {EstimandKind.TOTAL: tau, EstimandKind.MEAN: tau / config.N}

    cells = config.cells()
    by_pair: dict[tuple, list[dict]] = {}
    for cell in cells:
        by_pair.setdefault(cell["pair_key"], []).append(cell)

    def run_pair(pair_key: tuple, rep: int) -> list[dict]:
        i_nk, i_m, i_s = pair_key
        nk, M = config.nk_grid[i_nk], config.M_grid[i_m]
        synth = config.synth_modes[i_s]
        n = nk * M
        draw_ss, synth_ss = _pair_streams(config, pair_key, rep)
        sample = draw_pps_sample(pop, n, draw_ss)
        if synth is SynthesisMethod.FAITHFUL_SRS:
            synthetic = synthesize_srs(pop, n, synth_ss)
        else:
            synthetic = synthesize_biased(sample, n, synth_ss)

        partials = []
        est_cache = {
            e: (srs_estimate(synthetic.x, config.N, e), _trusted_estimate(sample, e))
            for e in config.estimands
        }
        for cell in by_pair[pair_key]:
            (est0, sd0), tau_hat = est_cache[cell["estimand"]]
            fixed = ToleranceSpec(
                ToleranceKind.SD_MULTIPLE, cell["alpha"], IntervalMode.FIXED
            )
            lo, hi = build_interval(est0, sd0, fixed, M)
            q = int(lo <= tau_hat <= hi)
            spec = ToleranceSpec(
                ToleranceKind.SD_MULTIPLE, cell["alpha"], cell["interval_mode"]
            )
            verify_ss, gibbs_ss = _row_streams(config, cell["cell_id"], rep)
            result = verify(
                sample, est0, sd0, cell["estimand"], spec, M, config.epsilon, verify_ss
            )
            partials.append(
                {
                    "cell": cell,
                    "rep": rep,
                    "tau_hat": tau_hat,
                    "tau0_hat": est0,
                    "sd0": sd0,
                    "Q": q,
                    "s_noisy": result.s_noisy,
                    "gibbs_ss": gibbs_ss,
                }
            )
        return partials

    jobs = [(pk, rep) for pk in by_pair for rep in range(config.reps)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            batches = list(pool.map(lambda a: run_pair(*a), jobs))
    else:
        batches = [run_pair(*j) for j in jobs]

    partials = sorted(
        (p for batch in batches for p in batch),
        key=lambda p: (p["cell"]["cell_id"], p["rep"]),
    )

    # Posterior medians run as lockstep chains grouped by M; per-row seeds
    # make the grouping irrelevant to the outcome.
    medians = np.empty(len(partials))
    by_m: dict[int, list[int]] = {}
    for i, p in enumerate(partials):
        by_m.setdefault(p["cell"]["M"], []).append(i)
    for M, idxs in by_m.items():
        meds = gibbs_medians(
            [partials[i]["s_noisy"] for i in idxs],
            M,
            config.epsilon,
            config.gibbs_iters,
            config.gibbs_burnin,
            [partials[i]["gibbs_ss"] for i in idxs],
        )
        medians[idxs] = meds

    rows = []
    for p, pm in zip(partials, medians):
        cell = p["cell"]
        rows.append(
            ReplicateRow(
                cell_id=cell["cell_id"],
                rep=p["rep"],
                N=config.N,
                n_k=cell["n_k"],
                M=cell["M"],
                alpha=cell["alpha"],
                epsilon=config.epsilon,
                interval_mode=cell["interval_mode"],
                synth_mode=cell["synth_mode"],
                estimand=cell["estimand"],
                trusted_tau_true=truth[cell["estimand"]],
                trusted_tau_hat=p["tau_hat"],
                tau0_hat=p["tau0_hat"],
                sd0=p["sd0"],
                trusted_Q=p["Q"],
                s_noisy=p["s_noisy"],
                posterior_median=float(pm),
            )
        )
    return rows


def compute_r_full(q_values: Sequence[int]) -> float:
    """Fraction of replicates whose full-data estimate sat inside the
    analyst's original interval."""
    q = np.asarray(q_values, dtype=float)
    if q.size == 0:
        raise ValueError("need at least one replicate")
    return float(np.mean(q))


def write_rows(rows: Iterable[ReplicateRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow(row.as_csv())


def read_rows(path: str | Path) -> list[ReplicateRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(CSV_HEADER) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"CSV is missing columns: {sorted(missing)}")
        rows = []
        for rec in reader:
            rows.append(
                ReplicateRow(
                    cell_id=int(rec["cell_id"]),
                    rep=int(rec["rep"]),
                    N=int(rec["N"]),
                    n_k=int(rec["n_k"]),
                    M=int(rec["M"]),
                    alpha=float(rec["alpha"]),
                    epsilon=float(rec["epsilon"]),
                    interval_mode=IntervalMode(rec["interval_mode"]),
                    synth_mode=SynthesisMethod(rec["synth_mode"]),
                    estimand=EstimandKind(rec["estimand"]),
                    trusted_tau_true=float(rec["trusted_tau_true"]),
                    trusted_tau_hat=float(rec["trusted_tau_hat"]),
                    tau0_hat=float(rec["tau0_hat"]),
                    sd0=float(rec["sd0"]),
                    trusted_Q=int(rec["trusted_Q"]),
                    s_noisy=float(rec["s_noisy"]),
                    posterior_median=float(rec["posterior_median"]),
                )
            )
    return rows


def summarize(rows: Sequence[ReplicateRow]) -> list[dict]:
    """One summary record per grid cell: r_full plus quartiles of the
    replicate posterior medians."""
    if not rows:
        raise ValueError("no rows to summarize")
    cells: dict[int, list[ReplicateRow]] = {}
    for row in rows:
        cells.setdefault(row.cell_id, []).append(row)
    out = []
    for cell_id in sorted(cells):
        rs = cells[cell_id]
        pms = np.array([r.posterior_median for r in rs])
        q25, q50, q75 = np.quantile(pms, [0.25, 0.5, 0.75])
        first = rs[0]
        out.append(
            {
                "cell_id": cell_id,
                "N": first.N,
                "n_k": first.n_k,
                "M": first.M,
                "alpha": first.alpha,
                "epsilon": first.epsilon,
                "interval_mode": first.interval_mode.value,
                "synth_mode": first.synth_mode.value,
                "estimand": first.estimand.value,
                "reps": len(rs),
                "r_full": compute_r_full([r.trusted_Q for r in rs]),
                "pm_q25": float(q25),
                "pm_median": float(q50),
                "pm_q75": float(q75),
            }
        )
    return out


def write_summary(summary: Sequence[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_HEADER)
        for rec in summary:
            writer.writerow(
                [
                    str(rec["cell_id"]),
                    str(rec["N"]),
                    str(rec["n_k"]),
                    str(rec["M"]),
                    repr(rec["alpha"]),
                    repr(rec["epsilon"]),
                    rec["interval_mode"],
                    rec["synth_mode"],
                    rec["estimand"],
                    str(rec["reps"]),
                    repr(rec["r_full"]),
                    repr(rec["pm_q25"]),
                    repr(rec["pm_median"]),
                    repr(rec["pm_q75"]),
                ]
            )


def run_indicator_diagnostic(
    sample: SurveySample,
    estimate0: float,
    sd0: float,
    kind: EstimandKind,
    alpha: float,
    epsilon: float,
    seed,
) -> float:
    """Degenerate one-partition pipeline check: with a fixed interval and a
    single partition holding the whole sample, the noised count is the
    full-data indicator plus Laplace noise, so at huge epsilon S^R/1 rounds
    to Q exactly."""
    scheme = PartitionScheme(M=1, assignment=np.zeros(sample.n, dtype=np.int64))
    estimate = partition_estimate(sample, scheme, 0, kind)
    spec = ToleranceSpec(ToleranceKind.SD_MULTIPLE, alpha, IntervalMode.FIXED)
    interval = build_interval(estimate0, sd0, spec, 1)
    s_true = count_within([estimate], interval)
    rng = np.random.default_rng(seed)
    u = rng.random()
    while u == 0.0:
        u = rng.random()
    return privatize_count(s_true, epsilon, u)

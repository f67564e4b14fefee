"""Scratch: seed-robustness of the desk-scale figure criteria (throwaway)."""
import numpy as np
import simverify as sv
from simverify.verification import ToleranceSpec, ToleranceKind, IntervalMode, build_interval, verify
from simverify.posterior import gibbs_medians

N = 200_000
reps = 50
M = 25
eps = 1.0

for base in (11, 22, 33):
    pop = sv.generate_population(N, seed=base)
    tau = pop.total
    rows, jobs = [], []
    for nk in (100, 500):
        n = nk * M
        for rep in range(reps):
            ss = np.random.SeedSequence([base, nk, rep])
            d_ss, s_ss, b_ss, *v_ss = ss.spawn(3 + 24)
            D = sv.draw_pps_sample(pop, n, d_ss)
            vi = 0
            for synth in ("faithful_srs", "biased_normal"):
                D0 = sv.synthesize_srs(pop, n, s_ss) if synth == "faithful_srs" else sv.synthesize_biased(D, n, b_ss)
                for estimand in ("total", "mean"):
                    kind = sv.EstimandKind(estimand)
                    est0, sd0 = sv.srs_estimate(D0.x, N, kind)
                    tau_hat = sv.horvitz_thompson_total(D) if estimand == "total" else sv.ratio_mean(D)
                    for alpha in (1.0, 3.0, 5.0):
                        T = build_interval(est0, sd0, ToleranceSpec(ToleranceKind.SD_MULTIPLE, alpha, IntervalMode.FIXED), M)
                        Q = int(T[0] <= tau_hat <= T[1])
                        spec = ToleranceSpec(ToleranceKind.SD_MULTIPLE, alpha, IntervalMode.ADJUSTED)
                        res = verify(D, est0, sd0, kind, spec, M, eps, v_ss[vi]); vi += 1
                        rows.append(dict(nk=nk, synth=synth, estimand=estimand, alpha=alpha, Q=Q, idx=len(jobs)))
                        jobs.append(res.s_noisy)
    meds = gibbs_medians(np.array(jobs), M, eps, 4000, 400, list(range(len(jobs))))
    for r in rows:
        r["pm"] = meds[r["idx"]]
    print(f"--- base seed {base} ---")
    agg = {}
    for r in rows:
        agg.setdefault((r["synth"], r["nk"], r["estimand"], r["alpha"]), []).append(r)
    for key in sorted(agg):
        rs = agg[key]
        r_full = np.mean([q["Q"] for q in rs])
        if key[0] == "faithful_srs":
            dev = np.mean([abs(q["pm"] - r_full) for q in rs])
            print(f"  F2 {key[1]:4d} {key[2]:5s} a={key[3]}: rf={r_full:.2f} dev={dev:.3f} {'ok' if dev<=0.15 else 'FAIL'}")
        else:
            frac = np.mean([q["pm"] < 0.1 for q in rs])
            print(f"  F35 {key[1]:4d} {key[2]:5s} a={key[3]}: frac={frac:.2f} {'ok' if frac>=0.9 else 'FAIL'}")

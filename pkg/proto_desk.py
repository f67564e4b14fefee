"""Scratch prototype: desk-scale figure statistics (throwaway, not shipped)."""
import time
import numpy as np
import simverify as sv
from simverify.verification import ToleranceSpec, ToleranceKind, IntervalMode, build_interval, verify
from simverify.posterior import gibbs_medians

t0 = time.time()
N = 200_000
reps = 50
M = 25
eps = 1.0
pop = sv.generate_population(N, seed=1234)
tau = pop.total
xbar_true = tau / N
print(f"pop: tau={tau:.1f} mean={xbar_true:.4f}  gen {time.time()-t0:.1f}s")

rows = []  # (nk, synth, estimand, mode, alpha, rep, Q, s_noisy)
jobs = []  # parallel gibbs jobs: s_noisy, seed
t0 = time.time()
for nk in (100, 500):
    n = nk * M
    for rep in range(reps):
        ss = np.random.SeedSequence([9, nk, rep])
        d_ss, s_ss, *v_ss = ss.spawn(2 + 60)
        D = sv.draw_pps_sample(pop, n, d_ss)
        vi = 0
        for synth in ("faithful_srs", "biased_normal"):
            if synth == "faithful_srs":
                D0 = sv.synthesize_srs(pop, n, s_ss)
            else:
                D0 = sv.synthesize_biased(D, n, s_ss)
            for estimand in ("total", "mean"):
                kind = sv.EstimandKind(estimand)
                est0, sd0 = sv.srs_estimate(D0.x, N, kind)
                tau_hat = sv.horvitz_thompson_total(D) if estimand == "total" else sv.ratio_mean(D)
                truth = tau if estimand == "total" else xbar_true
                for alpha in (1.0, 3.0, 5.0):
                    T = build_interval(est0, sd0, ToleranceSpec(ToleranceKind.SD_MULTIPLE, alpha, IntervalMode.FIXED), M)
                    Q = int(T[0] <= tau_hat <= T[1])
                    for mode in ("fixed", "adjusted"):
                        spec = ToleranceSpec(ToleranceKind.SD_MULTIPLE, alpha, IntervalMode(mode))
                        res = verify(D, est0, sd0, kind, spec, M, eps, v_ss[vi]); vi += 1
                        rows.append(dict(nk=nk, synth=synth, estimand=estimand, mode=mode,
                                         alpha=alpha, rep=rep, Q=Q, s_noisy=res.s_noisy,
                                         seed_idx=len(jobs)))
                        jobs.append(res.s_noisy)
print(f"sampling+verify: {time.time()-t0:.1f}s, rows={len(rows)}")

t0 = time.time()
meds = gibbs_medians(np.array(jobs), M, eps, 20000, 2000, list(range(len(jobs))))
print(f"gibbs {len(jobs)} chains: {time.time()-t0:.1f}s")
for row in rows:
    row["pm"] = meds[row["seed_idx"]]

# summaries per cell
def cells(filt):
    out = {}
    for r in rows:
        if all(r[k] == v for k, v in filt.items()):
            key = (r["nk"], r["estimand"], r["alpha"])
            out.setdefault(key, []).append(r)
    return out

print("\n== Figure-2: faithful + adjusted, mean |pm - r_full| (<= 0.15?) ==")
for key, rs in sorted(cells(dict(synth="faithful_srs", mode="adjusted")).items()):
    r_full = np.mean([r["Q"] for r in rs])
    dev = np.mean([abs(r["pm"] - r_full) for r in rs])
    print(f"  nk={key[0]:4d} {key[1]:5s} a={key[2]}: r_full={r_full:.3f} mean|pm-rf|={dev:.3f} {'OK' if dev<=0.15 else 'FAIL'}")

print("\n== Figure-1: faithful + fixed, cells r_full>0.4: mean pm < r_full-0.2? ==")
for key, rs in sorted(cells(dict(synth="faithful_srs", mode="fixed")).items()):
    r_full = np.mean([r["Q"] for r in rs])
    mpm = np.mean([r["pm"] for r in rs])
    tag = "(excluded)" if r_full <= 0.4 else ("OK" if mpm < r_full - 0.2 else "FAIL")
    print(f"  nk={key[0]:4d} {key[1]:5s} a={key[2]}: r_full={r_full:.3f} mean_pm={mpm:.3f} {tag}")

print("\n== Figure-3/5: biased + adjusted, frac(pm<0.1) >= 0.9? ==")
for key, rs in sorted(cells(dict(synth="biased_normal", mode="adjusted")).items()):
    frac = np.mean([r["pm"] < 0.1 for r in rs])
    r_full = np.mean([r["Q"] for r in rs])
    print(f"  nk={key[0]:4d} {key[1]:5s} a={key[2]}: r_full={r_full:.3f} frac(pm<0.1)={frac:.2f} {'OK' if frac>=0.9 else 'FAIL'}")

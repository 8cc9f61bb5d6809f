# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#   kernelspec:
#     display_name: Python 3
#     language: python
#     name: python3
# ---

# %% [markdown]
# # Hitting a budget
#
# A threshold is awkward to reason about; a budget such as "keep 60% of
# the faces" is not. `calibrate_threshold` bisects `n_t` until the
# retained fraction lands within `tol` of the target. The expensive part,
# ranking and pairwise cosines per identity, is computed once and reused
# for every probe.

# %%
from facenms import SamplerConfig, SynthConfig, calibrate_threshold, generate, run_sampler

train, _ = generate(SynthConfig(seed=7))

# %%
cal = calibrate_threshold(train, 0.60, tol=0.005)
for n_t, ratio in cal.evaluations:
    print(f"n_t={n_t:+.5f}  ratio={ratio:.4f}")
print(f"chosen n_t={cal.n_t:.6f}, achieved {cal.achieved_ratio:.4f}, converged={cal.converged}")

# %% [markdown]
# Retention usually grows with the threshold, though greedy suppression
# does not guarantee it. The search therefore returns the best threshold
# it actually evaluated, along with the ratio that threshold produced.

# %%
m = run_sampler(train, SamplerConfig("face_nms", n_t=cal.n_t))
print(f"re-running at n_t={cal.n_t:.6f}: {m.ratio:.4f}")

for target in (0.2, 0.4, 0.8, 1.0):
    c = calibrate_threshold(train, target)
    print(f"target {target:.1f}: n_t={c.n_t:+.4f} achieved {c.achieved_ratio:.4f} in {len(c.evaluations)} steps")

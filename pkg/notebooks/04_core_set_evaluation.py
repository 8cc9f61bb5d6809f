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
# # Does the core set still recognise people?
#
# Training a face model on each core set is out of reach here, so the
# check is a frozen-embedding proxy. Each identity gets a template, the
# normalised mean of its retained faces, and held-out faces are scored
# against every template:
#
# * rank-1 accuracy: the best-scoring template is the right identity
#   (nearest class mean);
# * TAR at FAR: the fraction of genuine probe/template scores above the
#   threshold that lets through the given fraction of impostor scores.

# %%
from facenms import SamplerConfig, SynthConfig, calibrate_threshold, compare, generate, run_sampler

far_levels = [1e-2, 1e-3]

# %% [markdown]
# ## An easy dataset
#
# Low noise and no duplicates, so every method should be near perfect.

# %%
train, holdout = generate(SynthConfig(seed=7, noise_sigma=0.05, dup_prob=0.0, holdout_per_identity=5))


def table(train, holdout, seed=7):
    cal = calibrate_threshold(train, 0.6)
    manifests = [
        run_sampler(train, SamplerConfig("face_nms", n_t=cal.n_t)),
        run_sampler(train, SamplerConfig("identity_random", ratio=0.6, seed=seed)),
        run_sampler(train, SamplerConfig("global_random", ratio=0.6, seed=seed)),
        run_sampler(train, SamplerConfig("k_center", ratio=0.6)),
    ]
    print(f"{'strategy':<16}{'ratio':>7}{'rank1':>8}" + "".join(f"{'TAR@' + format(f, 'g'):>12}" for f in far_levels))
    for r in compare(train, manifests, holdout, far_levels, seed=seed):
        print(f"{r.strategy:<16}{r.ratio:>7.3f}{r.rank1_accuracy:>8.4f}" + "".join(f"{r.tar_at_far[f]:>12.4f}" for f in far_levels))


table(train, holdout)

# %% [markdown]
# ## A harder dataset
#
# Noisier faces and many near-duplicates. A template is a mean, so a core
# set helps or hurts only through where it moves that mean. Duplicated
# faces pull the full-set mean toward whichever face happened to be
# copied; dropping them tends to recentre it. Treat this as a check that a
# core set keeps each identity's centre in place. It says nothing about how
# a network trained on the subset would generalise.

# %%
train, holdout = generate(SynthConfig(seed=7, noise_sigma=0.3, holdout_per_identity=5))
table(train, holdout)

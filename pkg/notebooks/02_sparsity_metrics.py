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
# # Measuring how spread out an identity is
#
# Sparsity of a group is minus the mean cosine over all ordered pairs,
# self-pairs included, which collapses to `-||sum f||^2 / N^2`. It is -1
# for a group of identical faces and approaches 0 as faces cancel out.
# Swapping one candidate face `f_prime` for another `f` changes it by
# `-2 / (N+1)^2 * sum_i f_i . (f - f_prime)`, so the best face to add is
# the one least aligned with the group's sum, i.e. the one farthest from
# the cluster center.

# %%
import numpy as np

from facenms import (
    SamplerConfig,
    SynthConfig,
    apply_manifest,
    contribution_diff,
    count_stats,
    generate,
    intra_similarity_histogram,
    run_sampler,
    sparsity,
    sparsity_report,
)
from facenms.vecmath import center_similarities, cluster_center

# %%
rng = np.random.default_rng(0)
rows = rng.standard_normal((12, 8)) + 2.0
rows /= np.linalg.norm(rows, axis=1, keepdims=True)
print(f"sparsity of 12 clustered faces: {sparsity(rows):.4f}")
print(f"same group with every face doubled: {sparsity(np.vstack([rows, rows])):.4f}")

# %% [markdown]
# Doubling every face leaves sparsity unchanged: it is a property of the
# direction mix, not of the count.

# %%
sims = center_similarities(rows, cluster_center(rows))
gains = [contribution_diff(rows, c, rows[0]) for c in rows]
print("farthest from center:", int(np.argmin(sims)), " largest sparsity gain:", int(np.argmax(gains)))

# %% [markdown]
# ## Before and after selection
#
# Three views of the same synthetic dataset: the full set, Face-NMS at
# threshold 0.45 (about 60% of faces), and a uniform random draw of the
# same size.

# %%
train, _ = generate(SynthConfig(seed=7))
nms = run_sampler(train, SamplerConfig("face_nms", n_t=0.45))
rnd = run_sampler(train, SamplerConfig("global_random", ratio=nms.ratio, seed=1))

print(f"{'view':<14}{'faces':>7}{'per id':>16}{'pair sim':>10}{'mean S':>9}")
for name, ds in (("full", train), ("face_nms", apply_manifest(train, nms)), ("global_random", apply_manifest(train, rnd))):
    h = intra_similarity_histogram(ds, 40)
    print(f"{name:<14}{ds.face_count:>7}{str(count_stats(ds)):>16}{h.mean:>10.4f}{sparsity_report(ds).mean_S:>9.4f}")

# %% [markdown]
# Face-NMS trims the big identities hardest, so faces per identity become
# more even. The remaining faces are also less alike, which shows up as a
# lower mean pair similarity and a higher mean sparsity. A random draw of
# the same size leaves both roughly where they were.

# %%
h = intra_similarity_histogram(apply_manifest(train, nms), 20)
for lo, hi, fr in h.rows():
    print(f"[{lo:+.1f}, {hi:+.1f})  {'#' * int(200 * fr)}")

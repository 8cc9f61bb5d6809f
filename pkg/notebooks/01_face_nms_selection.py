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
# # Selecting a core set with Face-NMS
#
# Face-NMS works one identity at a time. It ranks faces by how close they
# sit to the identity's mean embedding, keeps the least typical face, drops
# every remaining face whose cosine to it reaches the threshold `n_t`, and
# repeats. Near-duplicates vanish and the spread of the identity survives.

# %%
import numpy as np

from facenms import SamplerConfig, SynthConfig, apply_manifest, face_nms, generate, run_sampler
from facenms.store import IdentityGroup

# %% [markdown]
# ## A toy identity
#
# Four faces on the unit circle: three clustered around 0 degrees and one
# far out at 90 degrees.

# %%
angles = np.deg2rad([0.0, 4.0, -4.0, 90.0])
toy = IdentityGroup("toy", np.arange(4), np.c_[np.cos(angles), np.sin(angles)].astype(np.float32))

for n_t in (0.5, 0.99, 0.999, 1.01):
    print(f"n_t={n_t:<6} keeps faces {face_nms(toy, n_t).tolist()}")

# %% [markdown]
# The outlier (face 3) is always picked first. At a loose threshold one
# face from the cluster survives alongside it; raising `n_t` lets more of
# the cluster back in. Anything above 1 keeps everything.

# %% [markdown]
# ## A synthetic dataset

# %%
train, _ = generate(SynthConfig(seed=7, identities=200))
print(f"{len(train)} identities, {train.face_count} faces, dim {train.dim}")

for n_t in (0.3, 0.45, 0.6, 0.8):
    m = run_sampler(train, SamplerConfig("face_nms", n_t=n_t))
    print(f"n_t={n_t:<4} retains {m.retained_count:>5} faces ({m.ratio:.1%})")

# %% [markdown]
# ## Manifests
#
# Selections are stored as manifests: the retained face indices per
# identity plus the source dataset's fingerprint. Applying a manifest to a
# different dataset is refused.

# %%
m = run_sampler(train, SamplerConfig("face_nms", n_t=0.45))
core = apply_manifest(train, m)
print(f"fingerprint {m.dataset_fingerprint:016x}, sampler {m.sampler}")
print("id00000 keeps", m.retained["id00000"])
print(f"core set: {core.face_count} faces across {len(core)} identities")

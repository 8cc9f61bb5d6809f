"""Synthetic identity-clustered embeddings with injected near-duplicates.

Each identity gets a center drawn uniformly on the unit sphere. Faces are
``normalize(center + noise_sigma * z)`` with standard Gaussian ``z``. This
is Gaussian-perturb-then-normalize, not a von Mises-Fisher sampler.
With probability ``dup_prob`` a training face is instead a jittered copy
of an earlier face of the same identity. Face counts follow a lognormal
with the requested mean and standard deviation.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import ConfigError
from .rng import check_seed, stream
from .store import Dataset, IdentityGroup


@dataclass(frozen=True)
class SynthConfig:
    dim: int = 64
    identities: int = 200
    faces_mean: float = 50.0
    faces_std: float = 30.0
    noise_sigma: float = 0.25
    dup_prob: float = 0.3
    dup_jitter: float = 0.02
    seed: int = 7
    holdout_per_identity: int = 0

    def __post_init__(self):
        checks = [
            (isinstance(self.dim, int) and self.dim >= 2, "dim must be an integer >= 2"),
            (isinstance(self.identities, int) and self.identities >= 1, "identities must be an integer >= 1"),
            (self.faces_mean > 0, "faces_mean must be > 0"),
            (self.faces_std >= 0, "faces_std must be >= 0"),
            (self.noise_sigma > 0, "noise_sigma must be > 0"),
            (0 <= self.dup_prob < 1, "dup_prob must lie in [0, 1)"),
            (self.dup_jitter >= 0, "dup_jitter must be >= 0"),
            (
                isinstance(self.holdout_per_identity, int) and self.holdout_per_identity >= 0,
                "holdout_per_identity must be an integer >= 0",
            ),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        check_seed(self.seed)

    @classmethod
    def from_dict(cls, obj: dict) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown synth config keys: {sorted(unknown)}")
        return cls(**obj)

    @classmethod
    def from_json(cls, text: str) -> "SynthConfig":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"synth config is not JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise ConfigError("synth config must be a JSON object")
        return cls.from_dict(obj)

    def to_dict(self) -> dict:
        return asdict(self)


def identity_name(i: int, width: int) -> str:
    return f"id{i:0{width}d}"


def _lognormal_params(mean: float, std: float) -> tuple[float, float]:
    sigma2 = math.log1p((std / mean) ** 2)
    return math.log(mean) - sigma2 / 2, math.sqrt(sigma2)


def _face_count(cfg: SynthConfig, rng: np.random.Generator) -> int:
    mu, sigma = _lognormal_params(cfg.faces_mean, cfg.faces_std)
    raw = rng.lognormal(mu, sigma) if sigma > 0 else cfg.faces_mean
    upper = max(1, math.floor(10 * cfg.faces_mean))
    return int(min(upper, max(1, round(raw))))


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _identity_faces(cfg: SynthConfig, ident: str):
    rng = stream(cfg.seed, f"synth/{ident}")
    center = _unit(rng.standard_normal(cfg.dim))
    n = _face_count(cfg, rng)
    faces = np.empty((n, cfg.dim), dtype=np.float64)
    for j in range(n):
        if j > 0 and rng.random() < cfg.dup_prob:
            prev = faces[rng.integers(j)]
            faces[j] = _unit(prev + cfg.dup_jitter * rng.standard_normal(cfg.dim))
        else:
            faces[j] = _unit(center + cfg.noise_sigma * rng.standard_normal(cfg.dim))

    holdout = None
    if cfg.holdout_per_identity:
        hrng = stream(cfg.seed, f"synth-holdout/{ident}")
        noise = hrng.standard_normal((cfg.holdout_per_identity, cfg.dim))
        holdout = _unit(center[None, :] + cfg.noise_sigma * noise)
    return faces, holdout


def generate(cfg: SynthConfig) -> tuple[Dataset, Dataset | None]:
    """Build ``(train, holdout)``; holdout is None when ``holdout_per_identity`` is 0.

    Holdout faces come from a separate stream, so changing their number
    leaves the training set untouched.
    """
    width = max(5, len(str(cfg.identities - 1)))
    train, held = [], []
    for i in range(cfg.identities):
        ident = identity_name(i, width)
        faces, holdout = _identity_faces(cfg, ident)
        train.append(IdentityGroup(ident, np.arange(len(faces)), faces.astype(np.float32)))
        if holdout is not None:
            held.append(IdentityGroup(ident, np.arange(len(holdout)), holdout.astype(np.float32)))
    src = f"synth seed={cfg.seed}"
    train_ds = Dataset(cfg.dim, train, source=src)
    holdout_ds = Dataset(cfg.dim, held, source=src + " holdout") if held else None
    return train_ds, holdout_ds

"""Desk-scale downstream evaluation of core sets.

A core set is scored by how well its per-identity mean directions serve as
templates for held-out faces:

* identification: nearest-class-mean (cosine) rank-1 accuracy;
* verification: probe-vs-template cosine pairs, TAR at fixed FAR levels
  with thresholds taken from empirical impostor quantiles (no
  interpolation).

This is a cheap proxy for training a recognition model on the core set,
not an equivalent of real benchmark protocols.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InsufficientPairs, MissingIdentity, ValidationError
from .rng import stream
from .store import Dataset, SelectionManifest, apply_manifest, format_fingerprint
from .vecmath import cluster_center

NCM_NOTE = (
    "nearest-class-mean over unit cluster-center templates; a proxy for core-set "
    "quality, not a reproduction of deep-model benchmark numbers"
)


def class_templates(train: Dataset) -> tuple[list[str], np.ndarray]:
    """Sorted identity ids and the matching unit mean directions, shape (I, d)."""
    ids, rows = [], []
    for g in train.sorted_groups():
        c = cluster_center(g.features)
        n = c.norm
        ids.append(g.identity_id)
        rows.append(c.mean / n if n >= 1e-12 else np.zeros_like(c.mean))
    return ids, np.vstack(rows)


def _probes(train_ids: list[str], holdout: Dataset) -> tuple[np.ndarray, np.ndarray]:
    pos = {ident: i for i, ident in enumerate(train_ids)}
    feats, labels = [], []
    for g in holdout.sorted_groups():
        if g.identity_id not in pos:
            raise MissingIdentity(f"holdout identity {g.identity_id!r} is absent from the training set")
        feats.append(g.features.astype(np.float64))
        labels.append(np.full(len(g), pos[g.identity_id], dtype=np.int64))
    return np.vstack(feats), np.concatenate(labels)


def ncm_identify(train: Dataset, holdout: Dataset) -> float:
    """Rank-1 accuracy of assigning each holdout face to its nearest class mean.

    Ties go to the lexicographically smallest identity id.
    """
    ids, templates = class_templates(train)
    probes, labels = _probes(ids, holdout)
    pred = np.argmax(probes @ templates.T, axis=1)
    return float(np.mean(pred == labels))


def tar_at_far(genuine, impostor, far_levels) -> dict:
    """TAR at each FAR from empirical impostor quantiles.

    For FAR ``a`` over ``n`` impostor scores the threshold is the
    ``floor(a*n)``-th largest impostor score (0-based), and a pair is
    accepted when its score is strictly above it.
    """
    gen = np.asarray(genuine, dtype=np.float64)
    imp = np.sort(np.asarray(impostor, dtype=np.float64))[::-1]
    n = imp.size
    out = {}
    for far in far_levels:
        if not 0 < far < 1:
            raise ValidationError(f"FAR level must lie in (0, 1), got {far}")
        if n * far < 1 - 1e-9:
            raise InsufficientPairs(f"FAR {far:g} needs at least {math.ceil(1 / far)} impostor pairs, have {n}")
        k = math.floor(far * n + 1e-9)
        out[float(far)] = float(np.mean(gen > imp[k]))
    return out


def _sample(total: int, budget: int, rng: np.random.Generator) -> np.ndarray:
    if total <= budget:
        return np.arange(total, dtype=np.int64)
    return np.sort(rng.choice(total, size=budget, replace=False))


def verification_scores(train: Dataset, holdout: Dataset, pair_budget: int, seed: int):
    """Genuine and impostor probe-vs-template cosine scores.

    Genuine: holdout face against its own identity's template. Impostor:
    holdout face against any other identity's template. Each side is
    capped at ``pair_budget`` uniformly drawn pairs.
    """
    ids, templates = class_templates(train)
    if len(ids) < 2:
        raise InsufficientPairs("verification needs at least two identities")
    probes, labels = _probes(ids, holdout)
    n_probe, n_other = probes.shape[0], len(ids) - 1

    g = _sample(n_probe, pair_budget, stream(seed, "verify/genuine"))
    genuine = np.einsum("ij,ij->i", probes[g], templates[labels[g]])

    k = _sample(n_probe * n_other, pair_budget, stream(seed, "verify/impostor"))
    face, other = np.divmod(k, n_other)
    other = other + (other >= labels[face])  # skip the probe's own class
    impostor = np.einsum("ij,ij->i", probes[face], templates[other])
    return np.clip(genuine, -1, 1), np.clip(impostor, -1, 1)


def verify(train: Dataset, holdout: Dataset, far_levels, pair_budget: int = 1_000_000, seed: int = 0) -> dict:
    genuine, impostor = verification_scores(train, holdout, pair_budget, seed)
    return tar_at_far(genuine, impostor, far_levels)


@dataclass
class EvalReport:
    strategy: str
    ratio: float
    rank1_accuracy: float
    tar_at_far: dict
    genuine_pairs: int
    impostor_pairs: int
    config: dict = field(default_factory=dict)

    def row(self, far_levels) -> dict:
        out = {"strategy": self.strategy, "ratio": self.ratio, "rank1": self.rank1_accuracy}
        for far in far_levels:
            out[far_column(far)] = self.tar_at_far[float(far)]
        return out

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "ratio": self.ratio,
            "rank1_accuracy": self.rank1_accuracy,
            "tar_at_far": {f"{k:g}": v for k, v in self.tar_at_far.items()},
            "genuine_pairs": self.genuine_pairs,
            "impostor_pairs": self.impostor_pairs,
            "config": self.config,
        }


def far_column(far: float) -> str:
    return f"tar@far={far:g}"


def evaluate(train: Dataset, holdout: Dataset, far_levels, pair_budget: int, seed: int, strategy: str, ratio: float, config=None) -> EvalReport:
    genuine, impostor = verification_scores(train, holdout, pair_budget, seed)
    return EvalReport(
        strategy=strategy,
        ratio=ratio,
        rank1_accuracy=ncm_identify(train, holdout),
        tar_at_far=tar_at_far(genuine, impostor, far_levels),
        genuine_pairs=int(genuine.size),
        impostor_pairs=int(impostor.size),
        config=config or {},
    )


def compare(
    full: Dataset,
    manifests: list[SelectionManifest],
    holdout: Dataset,
    far_levels,
    pair_budget: int = 1_000_000,
    seed: int = 0,
) -> list[EvalReport]:
    """One report for the full set followed by one per manifest."""
    far_levels = [float(f) for f in far_levels]
    reports = [evaluate(full, holdout, far_levels, pair_budget, seed, "full", 1.0)]
    for m in manifests:
        core = apply_manifest(full, m)
        reports.append(evaluate(core, holdout, far_levels, pair_budget, seed, m.sampler["name"], m.ratio, m.sampler))
    return reports


def write_table_csv(reports: list[EvalReport], far_levels, path) -> None:
    cols = ["strategy", "ratio", "rank1"] + [far_column(f) for f in far_levels]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in reports:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.row(far_levels).items()})


def write_table_json(reports: list[EvalReport], full: Dataset, holdout: Dataset, path) -> None:
    doc = {
        "tool_version": __version__,
        "dataset_fingerprint": format_fingerprint(full.fingerprint),
        "holdout_fingerprint": format_fingerprint(holdout.fingerprint),
        "method": NCM_NOTE,
        "reports": [r.to_dict() for r in reports],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")

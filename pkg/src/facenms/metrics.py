"""Intra-identity sparsity and distribution statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyGroup, ValidationError
from .rng import stream
from .store import Dataset, IdentityGroup

DEFAULT_PAIR_BUDGET = 10_000_000


def _features(group) -> np.ndarray:
    feats = group.features if isinstance(group, IdentityGroup) else group
    m = np.asarray(feats, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] == 0:
        raise EmptyGroup("group must contain at least one face")
    return m


def _row_sum(m: np.ndarray) -> np.ndarray:
    total = np.zeros(m.shape[1], dtype=np.float64)
    for row in m:
        total += row
    return total


def sparsity(group) -> float:
    """Global sparsity: minus the mean cosine over all ordered pairs, self-pairs included.

    Evaluated as ``-||sum f||^2 / N^2``, which is the same double sum in O(N d).
    """
    m = _features(group)
    s = _row_sum(m)
    return -float(np.dot(s, s)) / m.shape[0] ** 2


def contribution_diff(group, f, f_prime) -> float:
    """Sparsity gain of adding ``f`` rather than ``f_prime`` to ``group``.

    Closed form ``-2/(N+1)^2 * sum_i f_i . (f - f')``; exact for unit f and f'.
    """
    m = _features(group)
    f = np.asarray(f, dtype=np.float64)
    fp = np.asarray(f_prime, dtype=np.float64)
    if f.shape != (m.shape[1],) or fp.shape != (m.shape[1],):
        raise DimensionMismatch(f"candidates must have dim {m.shape[1]}")
    n = m.shape[0]
    return -2.0 / (n + 1) ** 2 * float(np.dot(_row_sum(m), f - fp))


@dataclass(frozen=True)
class SparsityReport:
    per_identity: dict
    mean_S: float
    pair_count: int

    def to_dict(self) -> dict:
        return {
            "per_identity": self.per_identity,
            "mean_S": self.mean_S,
            "pair_count": self.pair_count,
            "includes_self_pairs": True,
        }


def sparsity_report(ds: Dataset) -> SparsityReport:
    per = {g.identity_id: sparsity(g) for g in ds.sorted_groups()}
    # fixed reduction order: sorted identity_id
    total = 0.0
    for ident in per:
        total += per[ident]
    return SparsityReport(
        per_identity=per,
        mean_S=total / len(per),
        pair_count=sum(len(g) ** 2 for g in ds.groups),
    )


@dataclass(frozen=True)
class SimilarityHistogram:
    edges: np.ndarray
    frequency: np.ndarray
    mean: float | None
    pair_count: int
    total_pairs: int
    sampled: bool

    def rows(self):
        for lo, hi, fr in zip(self.edges[:-1], self.edges[1:], self.frequency):
            yield float(lo), float(hi), float(fr)

    def to_dict(self) -> dict:
        return {
            "bin_edges": [float(x) for x in self.edges],
            "frequency": [float(x) for x in self.frequency],
            "mean": self.mean,
            "mean_defined": self.mean is not None,
            "pair_count": self.pair_count,
            "total_pairs": self.total_pairs,
            "sampled": self.sampled,
            "includes_self_pairs": False,
        }


def _decode_pairs(k: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Map row-major upper-triangle pair ids (i < j) of an n x n matrix to (i, j)."""
    rows = np.arange(n, dtype=np.int64)
    starts = rows * (2 * n - rows - 1) // 2
    i = np.searchsorted(starts, k, side="right") - 1
    j = k - starts[i] + i + 1
    return i, j


def intra_similarity_histogram(
    ds: Dataset,
    bins: int,
    pair_budget: int = DEFAULT_PAIR_BUDGET,
    seed: int | None = None,
) -> SimilarityHistogram:
    """Normalized histogram over [-1, 1] of within-identity cosines (i < j).

    All pairs are used while their total stays within ``pair_budget``;
    beyond that a uniform sample of ``pair_budget`` pairs is drawn, which
    requires ``seed``.
    """
    if bins < 2:
        raise ValidationError(f"bins must be >= 2, got {bins}")
    edges = np.linspace(-1.0, 1.0, bins + 1)
    counts = np.zeros(bins, dtype=np.int64)
    groups = ds.sorted_groups()
    sizes = np.array([len(g) for g in groups], dtype=np.int64)
    per_group = sizes * (sizes - 1) // 2
    total = int(per_group.sum())

    sampled = total > pair_budget
    if sampled:
        if seed is None:
            raise ValidationError(f"{total} pairs exceed the budget of {pair_budget}; a seed is required to subsample")
        picks = np.sort(stream(seed, "metrics/pairs").choice(total, size=pair_budget, replace=False))
        offsets = np.concatenate([[0], np.cumsum(per_group)])
        owner = np.searchsorted(offsets, picks, side="right") - 1

    acc = 0.0
    used = 0
    for gi, g in enumerate(groups):
        n = len(g)
        if n < 2:
            continue
        m = g.features.astype(np.float64)
        if sampled:
            k = picks[owner == gi] - offsets[gi]
            if k.size == 0:
                continue
            i, j = _decode_pairs(k, n)
            vals = np.clip(np.einsum("ij,ij->i", m[i], m[j]), -1.0, 1.0)
        else:
            iu, ju = np.triu_indices(n, k=1)
            vals = np.clip(m @ m.T, -1.0, 1.0)[iu, ju]
        counts += np.histogram(vals, bins=edges)[0]
        acc += float(vals.sum())
        used += vals.size

    freq = counts / used if used else np.zeros(bins)
    return SimilarityHistogram(
        edges=edges,
        frequency=freq,
        mean=acc / used if used else None,
        pair_count=used,
        total_pairs=total,
        sampled=sampled,
    )


@dataclass(frozen=True)
class CountStats:
    mean: float
    variance: float
    histogram: dict

    @property
    def std(self) -> float:
        return float(np.sqrt(self.variance))

    def __str__(self) -> str:
        return f"{self.mean:.2f} ± {self.std:.2f}"

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "variance": self.variance,
            "std": self.std,
            "histogram": [[k, v] for k, v in sorted(self.histogram.items())],
        }


def count_stats(ds: Dataset) -> CountStats:
    """Population mean/variance of faces per identity, plus the exact count histogram."""
    sizes = np.array([len(g) for g in ds.groups], dtype=np.float64)
    values, freq = np.unique(sizes.astype(np.int64), return_counts=True)
    return CountStats(
        mean=float(sizes.mean()),
        variance=float(sizes.var()),
        histogram={int(v): int(c) for v, c in zip(values, freq)},
    )

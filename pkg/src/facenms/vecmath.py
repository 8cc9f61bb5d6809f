"""Normalization, cosine similarity and cluster-center arithmetic.

Feature vectors are plain 1-D numpy arrays. Storage is float32; every
reduction here is carried out in float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCenter, DimensionMismatch, EmptyGroup, NonFinite, ZeroNorm

ZERO_NORM_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class ClusterCenter:
    """Arithmetic mean of an identity's features (deliberately not renormalized)."""

    mean: np.ndarray
    count: int

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.dot(self.mean, self.mean)))


def normalize(raw) -> np.ndarray:
    """Scale ``raw`` to unit L2 norm, returned as float64."""
    v = np.asarray(raw, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionMismatch(f"expected a 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NonFinite("vector contains NaN or Inf")
    n = np.sqrt(np.dot(v, v))
    if n < ZERO_NORM_EPS:
        raise ZeroNorm(f"vector norm {n:.3e} is below {ZERO_NORM_EPS:g}")
    return v / n


def normalize_rows(raw) -> np.ndarray:
    """Row-wise :func:`normalize` for an ``(n, d)`` matrix."""
    m = np.asarray(raw, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFinite("matrix contains NaN or Inf")
    norms = np.sqrt(np.einsum("ij,ij->i", m, m))
    bad = np.flatnonzero(norms < ZERO_NORM_EPS)
    if bad.size:
        raise ZeroNorm(f"row {int(bad[0])} has norm {norms[bad[0]]:.3e}")
    return m / norms[:, None]


def cosine(a, b) -> float:
    """Dot product of two unit vectors, clamped to [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"dimension {a.shape} vs {b.shape}")
    return float(min(1.0, max(-1.0, np.dot(a, b))))


def cosine_matrix(a, b=None) -> np.ndarray:
    """Clamped pairwise dot products between the rows of ``a`` and ``b``."""
    a = np.asarray(a, dtype=np.float64)
    b = a if b is None else np.asarray(b, dtype=np.float64)
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"dimension {a.shape[1]} vs {b.shape[1]}")
    return np.clip(a @ b.T, -1.0, 1.0)


def cluster_center(faces) -> ClusterCenter:
    """Componentwise mean of ``faces`` (an ``(n, d)`` array or list of vectors).

    Rows are summed top to bottom in float64, so callers wanting a
    permutation-stable result must pass faces in canonical (index) order.
    """
    m = np.asarray(faces, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] == 0:
        if m.size == 0:
            raise EmptyGroup("cluster_center needs at least one face")
        raise DimensionMismatch(f"expected (n, d) faces, got shape {m.shape}")
    total = np.zeros(m.shape[1], dtype=np.float64)
    for row in m:
        total += row
    return ClusterCenter(mean=total / m.shape[0], count=int(m.shape[0]))


def _unit_center(c: ClusterCenter) -> np.ndarray:
    n = c.norm
    if n < ZERO_NORM_EPS:
        raise DegenerateCenter(f"cluster center norm {n:.3e} is below {ZERO_NORM_EPS:g}")
    return c.mean / n


def center_similarity(f, c: ClusterCenter) -> float:
    """Cosine between face ``f`` and the direction of ``c.mean``."""
    f = np.asarray(f, dtype=np.float64)
    if f.shape != c.mean.shape:
        raise DimensionMismatch(f"dimension {f.shape} vs {c.mean.shape}")
    return cosine(f, _unit_center(c))


def center_similarities(faces, c: ClusterCenter) -> np.ndarray:
    """Vectorized :func:`center_similarity` over the rows of ``faces``."""
    m = np.asarray(faces, dtype=np.float64)
    if m.shape[1] != c.dim:
        raise DimensionMismatch(f"dimension {m.shape[1]} vs {c.dim}")
    return np.clip(m @ _unit_center(c), -1.0, 1.0)

"""Core-set selection strategies.

Per-identity strategies take an :class:`IdentityGroup` and return the
retained ``face_index`` values in the order they were chosen.
Dataset-level entry points (:func:`run_sampler`, :func:`global_random`,
:func:`score_select`) return a :class:`SelectionManifest`.

Ties in center similarity are always broken by ascending face index.
"""

from __future__ import annotations

import csv
import heapq
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    DegenerateCenter,
    EmptyGroup,
    GroupTooLarge,
    MalformedScoreFile,
    MissingScore,
)
from .rng import check_seed, stream
from .store import Dataset, IdentityGroup, SelectionManifest, build_manifest
from .vecmath import center_similarities, cluster_center

log = logging.getLogger(__name__)

STRATEGIES = (
    "face_nms",
    "away_center",
    "sim_threshold",
    "global_random",
    "identity_random",
    "k_center",
    "score_file",
)
ORDERS = ("higher_score_first", "lower_score_first")
K_CENTER_CAP = 4096
_GRAM_CAP = 4096
# similarities closer than this are ranked as ties (broken by face index)
TIE_TOL = 1e-12


def budget(ratio: float, n: int) -> int:
    """``max(1, round_half_up(ratio * n))``, capped at ``n``."""
    return max(1, min(n, math.floor(ratio * n + 0.5)))


def _check_ratio(ratio) -> float:
    if ratio is None or not 0.0 < float(ratio) <= 1.0:
        raise ConfigError(f"ratio must lie in (0, 1], got {ratio!r}")
    return float(ratio)


def _check_group(group: IdentityGroup) -> None:
    if len(group) == 0:
        raise EmptyGroup(f"identity {group.identity_id!r} has no faces")


def center_ranking(group: IdentityGroup) -> tuple[np.ndarray, np.ndarray]:
    """Row positions sorted by ascending center similarity, and the similarities.

    A degenerate (zero) center makes every face equally close, so the
    ranking falls back to plain index order.
    """
    _check_group(group)
    try:
        sims = center_similarities(group.features, cluster_center(group.features))
    except DegenerateCenter:
        log.warning("identity %r: degenerate cluster center, ranking by index", group.identity_id)
        sims = np.zeros(len(group))
    return tie_aware_order(sims), sims


def tie_aware_order(scores: np.ndarray, tol: float = TIE_TOL) -> np.ndarray:
    """Ascending order where scores within ``tol`` of a run's first score tie.

    Tied positions come out in position order, i.e. ascending face_index.
    Rounding to a fixed grid instead would split near-equal values that
    straddle a grid boundary.
    """
    by_score = np.argsort(scores, kind="stable")
    run = np.empty(len(scores), dtype=np.int64)
    start, r = None, -1
    for p in by_score:
        if start is None or scores[p] - start > tol:
            start, r = scores[p], r + 1
        run[p] = r
    return np.lexsort((np.arange(len(scores)), run))


class NMSPlan:
    """Face-NMS state that does not depend on the threshold.

    Holds the center-similarity ordering and the pairwise cosine matrix,
    so repeated runs at different thresholds (calibration) reuse them.
    """

    def __init__(self, group: IdentityGroup):
        self.group = group
        self.order, self.scores = center_ranking(group)
        self._feats = group.features.astype(np.float64)
        n = len(group)
        self._gram = np.clip(self._feats @ self._feats.T, -1.0, 1.0) if n <= _GRAM_CAP else None

    def _row(self, p: int) -> np.ndarray:
        if self._gram is not None:
            return self._gram[p]
        return np.clip(self._feats @ self._feats[p], -1.0, 1.0)

    def select(self, n_t: float) -> np.ndarray:
        """Retained row positions, in selection order."""
        alive = np.ones(len(self.group), dtype=bool)
        keep = []
        for p in self.order:
            if not alive[p]:
                continue
            alive[p] = False
            keep.append(p)
            alive &= self._row(p) < n_t
        return np.asarray(keep, dtype=np.int64)


def face_nms(group: IdentityGroup, n_t: float) -> np.ndarray:
    """Face-NMS on one identity.

    Repeatedly take the remaining face least similar to the (static,
    full-group) cluster center, keep it, and drop every remaining face
    whose cosine to it is ``>= n_t``.
    """
    plan = NMSPlan(group)
    return group.indices[plan.select(n_t)]


def away_center(group: IdentityGroup, ratio: float) -> np.ndarray:
    """The ``budget(ratio, N)`` faces farthest from the cluster center."""
    ratio = _check_ratio(ratio)
    order, _ = center_ranking(group)
    return group.indices[order[: budget(ratio, len(group))]]


def sim_threshold(group: IdentityGroup, n_t: float, rng: np.random.Generator) -> np.ndarray:
    """Random-order greedy suppression.

    Faces are visited in a uniformly random order; a face is kept iff its
    cosine to every face kept so far is below ``n_t``.
    """
    _check_group(group)
    feats = group.features.astype(np.float64)
    keep = []
    for p in rng.permutation(len(group)):
        if keep:
            sims = np.clip(feats[keep] @ feats[p], -1.0, 1.0)
            if np.any(sims >= n_t):
                continue
        keep.append(int(p))
    return group.indices[np.asarray(keep, dtype=np.int64)]


def identity_random(group: IdentityGroup, ratio: float, rng: np.random.Generator) -> np.ndarray:
    ratio = _check_ratio(ratio)
    _check_group(group)
    pos = rng.choice(len(group), size=budget(ratio, len(group)), replace=False)
    return group.indices[pos]


def k_center(group: IdentityGroup, ratio: float, max_group_size: int = K_CENTER_CAP) -> np.ndarray:
    """Greedy max-min (k-center) selection with cosine distance ``1 - cos``.

    Seeded with the face of minimum center similarity. Quadratic in N,
    hence the size cap.
    """
    ratio = _check_ratio(ratio)
    _check_group(group)
    n = len(group)
    if n > max_group_size:
        raise GroupTooLarge(f"identity {group.identity_id!r} has {n} faces; k_center cap is {max_group_size}")
    k = budget(ratio, n)
    order, _ = center_ranking(group)
    feats = group.features.astype(np.float64)
    chosen = [int(order[0])]
    mind = 1.0 - np.clip(feats @ feats[chosen[0]], -1.0, 1.0)
    mind[chosen[0]] = -np.inf
    while len(chosen) < k:
        p = int(np.argmax(mind))  # first maximum == lowest face index
        chosen.append(p)
        mind = np.minimum(mind, 1.0 - np.clip(feats @ feats[p], -1.0, 1.0))
        mind[chosen] = -np.inf
    return group.indices[np.asarray(chosen, dtype=np.int64)]


# ------------------------------------------------------ dataset-level strategies


def global_random(ds: Dataset, ratio: float, seed: int) -> SelectionManifest:
    """Uniform sample of ``round(ratio * total)`` faces across all identities.

    Identities left empty get their face closest to the cluster center
    back; the surplus is then trimmed one face at a time from the largest
    retained groups, never below one face per identity.
    """
    ratio = _check_ratio(ratio)
    rng = stream(seed, "global_random")
    groups = ds.sorted_groups()
    sizes = np.array([len(g) for g in groups], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    total = int(offsets[-1])
    target = budget(ratio, total)

    picks = np.sort(rng.choice(total, size=target, replace=False))
    owner = np.searchsorted(offsets, picks, side="right") - 1
    kept = {g.identity_id: list(picks[owner == gi] - offsets[gi]) for gi, g in enumerate(groups)}

    for g in groups:
        if not kept[g.identity_id]:
            _, sims = center_ranking(g)
            kept[g.identity_id] = [int(np.argmax(sims))]

    excess = sum(len(v) for v in kept.values()) - target
    heap = [(-len(kept[g.identity_id]), g.identity_id) for g in groups]
    heapq.heapify(heap)
    while excess > 0:
        neg, ident = heapq.heappop(heap)
        if -neg <= 1:
            break
        rows = sorted(kept[ident])
        rows.pop(int(rng.integers(len(rows))))
        kept[ident] = rows
        excess -= 1
        heapq.heappush(heap, (-len(rows), ident))

    retained = {g.identity_id: g.indices[np.asarray(kept[g.identity_id], dtype=np.int64)] for g in groups}
    record = {"name": "global_random", "params": {"ratio": ratio}, "seed": int(seed)}
    return build_manifest(ds, retained, record)


def read_scores(path) -> dict:
    """Parse an ``identity_id,face_index,score`` CSV into ``{(id, index): score}``."""
    scores = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["identity_id", "face_index", "score"]:
            raise MalformedScoreFile(f"{path}: header must be identity_id,face_index,score")
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != 3:
                raise MalformedScoreFile(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
            try:
                key = (row[0], int(row[1]))
                value = float(row[2])
            except ValueError as exc:
                raise MalformedScoreFile(f"{path}:{lineno}: {exc}") from exc
            if not math.isfinite(value):
                raise MalformedScoreFile(f"{path}:{lineno}: non-finite score")
            if key in scores:
                raise MalformedScoreFile(f"{path}:{lineno}: duplicate entry for {key}")
            scores[key] = value
    return scores


def score_top_k(group: IdentityGroup, scores: dict, ratio: float, order: str) -> np.ndarray:
    if order not in ORDERS:
        raise ConfigError(f"order must be one of {ORDERS}, got {order!r}")
    vals = []
    for idx in group.indices:
        key = (group.identity_id, int(idx))
        if key not in scores:
            raise MissingScore(f"no score for identity {group.identity_id!r} face {int(idx)}")
        vals.append(scores[key])
    vals = np.asarray(vals, dtype=np.float64)
    if order == "higher_score_first":
        vals = -vals
    ranked = np.argsort(vals, kind="stable")
    return group.indices[ranked[: budget(ratio, len(group))]]


def score_select(ds: Dataset, score_path, ratio: float, order: str) -> SelectionManifest:
    """Per-identity top-k by an externally produced score (entropy, forgetting...).

    Rows for identities or faces absent from ``ds`` are ignored.
    """
    cfg = SamplerConfig("score_file", ratio=ratio, score_path=str(score_path), order=order)
    return run_sampler(ds, cfg)


# ------------------------------------------------------------- calibration


@dataclass(frozen=True)
class Calibration:
    n_t: float
    achieved_ratio: float
    target_ratio: float
    tol: float
    evaluations: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return abs(self.achieved_ratio - self.target_ratio) <= self.tol

    def to_dict(self) -> dict:
        return {
            "n_t": self.n_t,
            "achieved_ratio": self.achieved_ratio,
            "target_ratio": self.target_ratio,
            "tol": self.tol,
            "converged": self.converged,
            "evaluations": [{"n_t": t, "ratio": r} for t, r in self.evaluations],
        }


def calibrate_threshold(
    ds: Dataset,
    target_ratio: float,
    tol: float = 0.005,
    max_iters: int = 60,
    lo: float = -1.0,
    hi: float = 1.01,
) -> Calibration:
    """Bisect the Face-NMS threshold until the retained fraction is within ``tol``.

    Assumes retention grows with the threshold, which is typical but not
    guaranteed for greedy suppression; the best evaluated threshold is
    returned regardless, together with its achieved ratio.
    """
    target_ratio = _check_ratio(target_ratio)
    if not tol > 0:
        raise ConfigError(f"tol must be positive, got {tol!r}")
    plans = [NMSPlan(g) for g in ds.sorted_groups()]
    total = ds.face_count
    history = []

    def evaluate(n_t):
        r = sum(p.select(n_t).size for p in plans) / total
        history.append((float(n_t), r))
        return r

    best = None
    for n_t in (hi, lo):
        r = evaluate(n_t)
        if best is None or abs(r - target_ratio) < abs(best[1] - target_ratio):
            best = (n_t, r)
    for _ in range(max_iters):
        if abs(best[1] - target_ratio) <= tol or hi - lo < 1e-12:
            break
        mid = 0.5 * (lo + hi)
        r = evaluate(mid)
        if abs(r - target_ratio) < abs(best[1] - target_ratio):
            best = (mid, r)
        if r < target_ratio:
            lo = mid
        else:
            hi = mid
    log.info("calibrated n_t=%.6f ratio=%.5f after %d evaluations", best[0], best[1], len(history))
    return Calibration(float(best[0]), best[1], target_ratio, float(tol), history)


# ------------------------------------------------------------------ driver


@dataclass(frozen=True)
class SamplerConfig:
    strategy: str
    n_t: float | None = None
    ratio: float | None = None
    seed: int | None = None
    score_path: str | None = None
    order: str | None = None
    max_group_size: int = K_CENTER_CAP

    _NEEDS = {
        "face_nms": {"n_t"},
        "sim_threshold": {"n_t", "seed"},
        "away_center": {"ratio"},
        "global_random": {"ratio", "seed"},
        "identity_random": {"ratio", "seed"},
        "k_center": {"ratio"},
        "score_file": {"ratio", "score_path", "order"},
    }

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; choose from {', '.join(STRATEGIES)}")
        needs = self._NEEDS[self.strategy]
        for name in ("n_t", "ratio", "seed", "score_path", "order"):
            present = getattr(self, name) is not None
            if present and name not in needs:
                raise ConfigError(f"strategy {self.strategy} does not take {name}")
            if not present and name in needs:
                raise ConfigError(f"strategy {self.strategy} requires {name}")
        if self.ratio is not None:
            _check_ratio(self.ratio)
        if self.seed is not None:
            check_seed(self.seed)
        if self.n_t is not None and not math.isfinite(self.n_t):
            raise ConfigError(f"n_t must be finite, got {self.n_t!r}")
        if self.order is not None and self.order not in ORDERS:
            raise ConfigError(f"order must be one of {ORDERS}, got {self.order!r}")

    def record(self) -> dict:
        params = {}
        for name in ("n_t", "ratio", "order"):
            if getattr(self, name) is not None:
                params[name] = getattr(self, name)
        if self.score_path is not None:
            params["score_file"] = Path(self.score_path).name
        if self.strategy == "k_center":
            params["max_group_size"] = self.max_group_size
        return {"name": self.strategy, "params": params, "seed": self.seed}


def _per_identity(cfg: SamplerConfig, scores):
    s = cfg.strategy
    if s == "face_nms":
        return lambda g: face_nms(g, cfg.n_t)
    if s == "away_center":
        return lambda g: away_center(g, cfg.ratio)
    if s == "k_center":
        return lambda g: k_center(g, cfg.ratio, cfg.max_group_size)
    if s == "sim_threshold":
        return lambda g: sim_threshold(g, cfg.n_t, stream(cfg.seed, f"sim_threshold/{g.identity_id}"))
    if s == "identity_random":
        return lambda g: identity_random(g, cfg.ratio, stream(cfg.seed, f"identity_random/{g.identity_id}"))
    if s == "score_file":
        return lambda g: score_top_k(g, scores, cfg.ratio, cfg.order)
    raise ConfigError(f"{s} is not a per-identity strategy")


def _workers(threads: int) -> int:
    if threads < 0:
        raise ConfigError(f"threads must be >= 0, got {threads}")
    return threads or os.cpu_count() or 1


def run_sampler(ds: Dataset, cfg: SamplerConfig, threads: int = 1) -> SelectionManifest:
    """Apply ``cfg`` to ``ds`` and assemble a manifest.

    Identities may be processed in parallel; the result depends only on
    ``(ds, cfg)``.
    """
    if cfg.strategy == "global_random":
        return global_random(ds, cfg.ratio, cfg.seed)
    scores = read_scores(cfg.score_path) if cfg.strategy == "score_file" else None
    fn = _per_identity(cfg, scores)
    groups = ds.sorted_groups()
    workers = _workers(threads)
    if workers == 1:
        picked = [fn(g) for g in groups]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            picked = list(pool.map(fn, groups))
    retained = {g.identity_id: p for g, p in zip(groups, picked)}
    return build_manifest(ds, retained, cfg.record())

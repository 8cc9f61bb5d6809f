"""Slow, independent reference implementations used as test oracles.

Everything here works on plain Python floats with explicit loops and
shares no code with the package.
"""

import itertools
import math


def dot(a, b):
    s = 0.0
    for x, y in zip(a, b):
        s += float(x) * float(y)
    return s


def as_rows(features):
    return [[float(x) for x in row] for row in features]


def mean_rows(rows):
    n = len(rows)
    d = len(rows[0])
    return [sum(r[k] for r in rows) / n for k in range(d)]


def sparsity_double_loop(rows):
    n = len(rows)
    total = 0.0
    for i in range(n):
        for j in range(n):
            total += dot(rows[i], rows[j])
    return -total / (n * n)


def sparsity_pairwise(features):
    """Same double loop over ordered pairs, with each pair's dot done by numpy."""
    import numpy as np

    f = np.asarray(features, dtype=np.float64)
    n = len(f)
    total = 0.0
    for i in range(n):
        for j in range(n):
            total += float(np.dot(f[i], f[j]))
    return -total / (n * n)


def center_scores(rows):
    c = mean_rows(rows)
    norm = math.sqrt(dot(c, c))
    return [dot(r, c) / norm for r in rows]


def tie_ranks(scores, tol=1e-12):
    """Run number of each score: ascending, a run holds scores within tol of its first."""
    ranks = [0] * len(scores)
    start, r = None, -1
    for p in sorted(range(len(scores)), key=lambda q: scores[q]):
        if start is None or scores[p] - start > tol:
            start, r = scores[p], r + 1
        ranks[p] = r
    return ranks


def face_nms_reference(rows, face_indices, n_t):
    """Line-by-line transcription of the Face-NMS pseudo-code.

    B holds the remaining faces, S their center scores; ties in argmin go
    to the smallest face index.
    """
    scores = tie_ranks(center_scores(rows))
    B = list(range(len(rows)))
    S = {i: scores[i] for i in B}
    D = []
    while B:
        m = min(B, key=lambda i: (S[i], face_indices[i]))
        b_r = m
        B.remove(m)
        del S[m]
        D.append(m)
        for b_i in list(B):
            if dot(rows[b_r], rows[b_i]) >= n_t:
                B.remove(b_i)
                del S[b_i]
    return [face_indices[i] for i in D]


def sim_threshold_visit(rows, face_indices, n_t, visit_order):
    kept = []
    for p in visit_order:
        if all(dot(rows[p], rows[q]) < n_t for q in kept):
            kept.append(p)
    return [face_indices[i] for i in kept]


def first_extreme(values, largest=False, rel_tol=1e-9):
    """Position of the min (or max) value; near-ties go to the earliest position."""
    best = max(values) if largest else min(values)
    tol = rel_tol * max(1.0, abs(best))
    for p, v in enumerate(values):
        if abs(v - best) <= tol:
            return p


def maxmin_candidates(rows, selected):
    """Best achievable min-distance to ``selected`` and the faces attaining it."""
    best, who = -math.inf, []
    for i in range(len(rows)):
        if i in selected:
            continue
        dmin = min(1.0 - dot(rows[i], rows[s]) for s in selected)
        if dmin > best + 1e-12:
            best, who = dmin, [i]
        elif abs(dmin - best) <= 1e-12:
            who.append(i)
    return best, who


def best_subset_sparsity(rows, k):
    """Exhaustive max of -||sum f||^2 / k^2 over all size-k subsets."""
    best, arg = -math.inf, []
    for combo in itertools.combinations(range(len(rows)), k):
        s = [sum(rows[i][c] for i in combo) for c in range(len(rows[0]))]
        val = -dot(s, s) / (k * k)
        if val > best + 1e-12:
            best, arg = val, [combo]
        elif abs(val - best) <= 1e-12:
            arg.append(combo)
    return best, arg


def empirical_tar(genuine, impostor, far):
    imp = sorted(impostor, reverse=True)
    k = int(math.floor(far * len(imp) + 1e-9))
    thr = imp[k]
    return sum(1 for g in genuine if g > thr) / len(genuine)

"""Acceptance criteria, one test each, each printing a single pass/fail line.

Run alone with ``pytest tests/test_acceptance.py -s`` to see the lines
inline; a full ``pytest`` run repeats them in the terminal summary.
Comparison tables and summary values land in ``artifacts/``.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest

from facenms.evaluation import compare, ncm_identify, verify, write_table_csv, write_table_json
from facenms.metrics import contribution_diff, count_stats, intra_similarity_histogram, sparsity, sparsity_report
from facenms.samplers import STRATEGIES, SamplerConfig, calibrate_threshold, center_ranking, face_nms, k_center, run_sampler
from facenms.store import IdentityGroup, apply_manifest, read_dataset, write_dataset
from facenms.vecmath import center_similarities, cluster_center

import oracles
from acceptance_log import record
from conftest import clustered_group, random_dataset, unit_rows

ARTIFACTS = Path(__file__).resolve().parent.parent / "artifacts"
TARGET = 0.60


def positions(group, face_indices):
    lookup = {int(i): p for p, i in enumerate(group.indices)}
    return [lookup[int(i)] for i in face_indices]


def nms_group(rng, max_n, max_d):
    n = int(rng.integers(1, max_n + 1))
    d = int(rng.integers(2, max_d + 1))
    # spread ~ u / sqrt(d) puts typical pair cosines near 1 / (1 + u^2)
    return clustered_group(rng, n, d, spread=rng.uniform(0.3, 2.0) / np.sqrt(d))


@pytest.fixture(scope="module")
def at_sixty(fixed_ds):
    cal = calibrate_threshold(fixed_ds, TARGET, tol=0.005)
    nms = run_sampler(fixed_ds, SamplerConfig("face_nms", n_t=cal.n_t))
    ident = run_sampler(fixed_ds, SamplerConfig("identity_random", ratio=TARGET, seed=7))
    glob = run_sampler(fixed_ds, SamplerConfig("global_random", ratio=TARGET, seed=7))
    views = {
        "full": fixed_ds,
        "face_nms": apply_manifest(fixed_ds, nms),
        "identity_random": apply_manifest(fixed_ds, ident),
        "global_random": apply_manifest(fixed_ds, glob),
    }
    summary = {"n_t": cal.n_t, "ratios": {"face_nms": nms.ratio, "identity_random": ident.ratio, "global_random": glob.ratio}}
    for name, ds in views.items():
        cs = count_stats(ds)
        summary[name] = {
            "count_mean": cs.mean,
            "count_std": cs.std,
            "mean_pair_similarity": intra_similarity_histogram(ds, 40).mean,
            "mean_sparsity": sparsity_report(ds).mean_S,
        }
    ARTIFACTS.mkdir(exist_ok=True)
    (ARTIFACTS / "fixed_config_60pct.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def test_criterion_01_sparsity_matches_double_loop():
    rng = np.random.default_rng(101)
    groups = [unit_rows(rng, int(rng.integers(1, 65)), int(rng.integers(2, 129))) for _ in range(1000)]
    t0 = time.perf_counter()
    fast = [sparsity(g) for g in groups]
    elapsed = time.perf_counter() - t0
    worst = max(abs(s - oracles.sparsity_pairwise(g)) for s, g in zip(fast, groups))
    passed = worst <= 1e-6 and elapsed < 5.0
    record(1, "sparsity vs O(N^2 d) double loop", passed, f"1000 groups, max err {worst:.2e}, {elapsed:.3f}s")
    assert passed


def test_criterion_02_contribution_diff_algebra():
    rng = np.random.default_rng(102)
    worst = worst_anti = 0.0
    for _ in range(1000):
        n, d = int(rng.integers(1, 33)), int(rng.integers(2, 65))
        rows = unit_rows(rng, n, d)
        f, fp = unit_rows(rng, 2, d)
        got = contribution_diff(rows, f, fp)
        direct = oracles.sparsity_pairwise(np.vstack([rows, f])) - oracles.sparsity_pairwise(np.vstack([rows, fp]))
        worst = max(worst, abs(got - direct))
        worst_anti = max(worst_anti, abs(got + contribution_diff(rows, fp, f)))
    passed = worst <= 1e-6 and worst_anti <= 1e-6
    record(2, "contribution_diff vs direct difference", passed,
           f"1000 instances, max err {worst:.2e}, antisymmetry {worst_anti:.2e}")
    assert passed


def test_criterion_03_face_nms_matches_transcription():
    rng = np.random.default_rng(103)
    thresholds = (0.3, 0.6, 0.8, 0.95)
    mismatches = bound_violations = uncovered = kept = total = 0
    for _ in range(500):
        g = nms_group(rng, 50, 32)
        rows = oracles.as_rows(g.features)
        idx = [int(i) for i in g.indices]
        for n_t in thresholds:
            got = [int(i) for i in face_nms(g, n_t)]
            mismatches += got != oracles.face_nms_reference(rows, idx, n_t)
            pos = positions(g, got)
            kept += len(pos)
            total += len(rows)
            bound_violations += sum(
                oracles.dot(rows[a], rows[b]) >= n_t for i, a in enumerate(pos) for b in pos[i + 1:]
            )
            order = [int(p) for p in center_ranking(g)[0]]
            for p in set(range(len(rows))) - set(pos):
                # dropped by some retained face that was selected before p's turn
                earlier = [q for q in pos if order.index(q) < order.index(p)]
                if not any(oracles.dot(rows[q], rows[p]) >= n_t for q in earlier):
                    uncovered += 1
    passed = mismatches == 0 and bound_violations == 0 and uncovered == 0
    record(3, "face_nms vs line-by-line transcription", passed,
           f"2000 runs, {mismatches} mismatches, {bound_violations} bound violations, {uncovered} uncovered drops, "
           f"{kept / total:.1%} retained overall")
    assert passed


def test_criterion_04_ranking_equivalence():
    rng = np.random.default_rng(104)
    disagreements = forced_ties = 0
    for t in range(500):
        rows = unit_rows(rng, int(rng.integers(2, 41)), int(rng.integers(2, 65)))
        if t % 5 == 0:
            # duplicate the outermost face so the extreme is an exact tie
            far = int(np.argmin(center_similarities(rows, cluster_center(rows))))
            rows = np.insert(rows, int(rng.integers(far + 1, len(rows) + 1)), rows[far], axis=0)
            forced_ties += 1
        ref = rows[0]
        sims = center_similarities(rows, cluster_center(rows))
        gains = [contribution_diff(rows, c, ref) for c in rows]
        a = oracles.first_extreme(list(sims))
        b = oracles.first_extreme(gains, largest=True)
        g = IdentityGroup("g", np.arange(len(rows)), rows.astype(np.float32))
        c = int(center_ranking(g)[0][0])
        # float32 storage leaves norms ~1e-8 off unit, enough to split theoretical ties by ~1e-10,
        # so the package ranking is checked at its own 1e-12 tie tolerance
        ranks = oracles.tie_ranks(oracles.center_scores(oracles.as_rows(g.features)))
        c_oracle = ranks.index(min(ranks))
        disagreements += not (a == b and c == c_oracle)
    passed = disagreements == 0
    record(4, "argmin center similarity == argmax contribution_diff", passed,
           f"500 groups ({forced_ties} with forced ties), {disagreements} disagreements")
    assert passed


def test_criterion_05_k_center_greedy_steps():
    rng = np.random.default_rng(105)
    bad_steps = steps = 0
    for _ in range(200):
        g = nms_group(rng, 30, 16)
        out = positions(g, k_center(g, float(rng.uniform(0.2, 1.0))))
        rows = oracles.as_rows(g.features)
        ranks = oracles.tie_ranks(oracles.center_scores(rows))
        bad_steps += out[0] != ranks.index(min(ranks))
        for t in range(1, len(out)):
            _, who = oracles.maxmin_candidates(rows, out[:t])
            bad_steps += out[t] not in who
            steps += 1
    passed = bad_steps == 0
    record(5, "k_center greedy steps vs exhaustive max-min", passed, f"200 groups, {steps} steps, {bad_steps} wrong")
    assert passed


def test_criterion_06_calibration(fixed_ds):
    t0 = time.perf_counter()
    cal = calibrate_threshold(fixed_ds, TARGET, tol=0.005)
    elapsed = time.perf_counter() - t0
    achieved = run_sampler(fixed_ds, SamplerConfig("face_nms", n_t=cal.n_t)).ratio
    passed = abs(achieved - TARGET) <= 0.005 and elapsed < 60.0
    record(6, "calibrate_threshold to 60%", passed,
           f"n_t={cal.n_t:.6f}, achieved {achieved:.4f}, {len(cal.evaluations)} evaluations, {elapsed:.2f}s")
    assert passed


def test_criterion_07_count_std(at_sixty):
    full, nms, ir = (at_sixty[k]["count_std"] for k in ("full", "face_nms", "identity_random"))
    passed = nms < full and nms < ir
    record(7, "faces-per-identity std: face_nms < full, < identity_random", passed,
           f"full {full:.2f}, face_nms {nms:.2f}, identity_random {ir:.2f}")
    assert passed


def test_criterion_08_pair_similarity(at_sixty):
    full, nms, gr = (at_sixty[k]["mean_pair_similarity"] for k in ("full", "face_nms", "global_random"))
    passed = nms < full and nms < gr
    record(8, "mean intra-class pair similarity: face_nms < full, < global_random", passed,
           f"full {full:.4f}, face_nms {nms:.4f}, global_random {gr:.4f}")
    assert passed


def test_criterion_09_sparsity_ordering(at_sixty):
    nms, gr = at_sixty["face_nms"]["mean_sparsity"], at_sixty["global_random"]["mean_sparsity"]
    passed = nms - gr >= 0
    record(9, "mean sparsity: face_nms >= global_random", passed,
           f"face_nms {nms:.4f}, global_random {gr:.4f}, margin {nms - gr:.4f}")
    assert passed


def test_criterion_10_determinism(fixed_ds, tmp_path):
    scores = tmp_path / "scores.csv"
    rng = np.random.default_rng(110)
    with open(scores, "w") as fh:
        fh.write("identity_id,face_index,score\n")
        for g in fixed_ds.sorted_groups():
            for i, s in zip(g.indices, rng.integers(0, 50, len(g))):
                fh.write(f"{g.identity_id},{int(i)},{int(s) / 10}\n")
    configs = {
        "face_nms": SamplerConfig("face_nms", n_t=0.45),
        "away_center": SamplerConfig("away_center", ratio=TARGET),
        "sim_threshold": SamplerConfig("sim_threshold", n_t=0.45, seed=7),
        "global_random": SamplerConfig("global_random", ratio=TARGET, seed=7),
        "identity_random": SamplerConfig("identity_random", ratio=TARGET, seed=7),
        "k_center": SamplerConfig("k_center", ratio=TARGET),
        "score_file": SamplerConfig("score_file", ratio=TARGET, score_path=str(scores), order="higher_score_first"),
    }
    assert set(configs) == set(STRATEGIES)
    path = tmp_path / "fixed.bin"
    write_dataset(fixed_ds, path)
    unstable = []
    for name, cfg in configs.items():
        blobs = set()
        for run in range(2):
            ds = fixed_ds if run == 0 else read_dataset(path)
            for threads in (1, 4, 8):
                blobs.add(run_sampler(ds, cfg, threads=threads).to_json())
        if len(blobs) != 1:
            unstable.append(name)
    passed = not unstable
    record(10, "byte-identical manifests across threads and runs", passed,
           f"{len(configs)} strategies x threads {{1,4,8}} x 2 runs" + (f", unstable: {unstable}" if unstable else ""))
    assert passed


def test_criterion_11_format_round_trip(tmp_path):
    rng = np.random.default_rng(111)
    broken = 0
    for k in range(50):
        ds = random_dataset(rng, n_ids=int(rng.integers(1, 8)), max_faces=15)
        b, j, b2 = tmp_path / f"{k}.bin", tmp_path / f"{k}.jsonl", tmp_path / f"{k}b.bin"
        write_dataset(ds, b)
        write_dataset(read_dataset(b), j, "jsonl")
        write_dataset(read_dataset(j), b2)
        fps = {ds.fingerprint, read_dataset(b).fingerprint, read_dataset(j).fingerprint, read_dataset(b2).fingerprint}
        broken += len(fps) != 1 or b.read_bytes() != b2.read_bytes()
    passed = broken == 0
    record(11, "binary <-> JSONL round trip keeps fingerprints", passed, f"50 datasets, {broken} broken")
    assert passed


def test_criterion_12_eval_sanity(separable):
    train, holdout = separable
    far_levels = [1e-2, 1e-3]
    rank1 = ncm_identify(train, holdout)
    tar = verify(train, holdout, [1e-2], seed=7)[1e-2]
    cal = calibrate_threshold(train, TARGET, tol=0.005)
    manifests = [
        run_sampler(train, SamplerConfig("face_nms", n_t=cal.n_t)),
        run_sampler(train, SamplerConfig("identity_random", ratio=TARGET, seed=7)),
        run_sampler(train, SamplerConfig("global_random", ratio=TARGET, seed=7)),
    ]
    reports = compare(train, manifests, holdout, far_levels, seed=7)
    ARTIFACTS.mkdir(exist_ok=True)
    write_table_csv(reports, far_levels, ARTIFACTS / "separable_comparison.csv")
    write_table_json(reports, train, holdout, ARTIFACTS / "separable_comparison.json")
    delta = abs(reports[1].rank1_accuracy - reports[0].rank1_accuracy)
    passed = rank1 == 1.0 and tar == 1.0 and delta <= 0.02
    record(12, "separable config: full-set accuracy and face_nms 60% rank-1 drift", passed,
           f"rank1 {rank1:.4f}, TAR@1e-2 {tar:.4f}, face_nms ratio {manifests[0].ratio:.4f} "
           f"rank1 {reports[1].rank1_accuracy:.4f}, delta {100 * delta:.2f} pp")
    assert passed

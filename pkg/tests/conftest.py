import numpy as np
import pytest

from facenms.store import Dataset, IdentityGroup
from facenms.synth import SynthConfig, generate

import acceptance_log

FIXED = dict(
    seed=7,
    identities=200,
    dim=64,
    faces_mean=50,
    faces_std=30,
    noise_sigma=0.25,
    dup_prob=0.3,
    dup_jitter=0.02,
)


def unit_rows(rng, n, d):
    m = rng.standard_normal((n, d))
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def clustered_group(rng, n, d, spread=None, ident="g", dup_prob=0.2):
    """A random group around a random center, with some near-duplicates."""
    if spread is None:
        spread = rng.uniform(0.1, 1.5)
    center = unit_rows(rng, 1, d)[0]
    rows = []
    for j in range(n):
        if j and rng.random() < dup_prob:
            base = rows[rng.integers(j)] + 0.01 * rng.standard_normal(d)
        else:
            base = center + spread * rng.standard_normal(d)
        rows.append(base / np.linalg.norm(base))
    idx = np.sort(rng.choice(10 * n + 10, size=n, replace=False))
    return IdentityGroup(ident, idx, np.asarray(rows, dtype=np.float32))


def random_dataset(rng, n_ids=None, d=None, max_faces=12):
    n_ids = n_ids or int(rng.integers(1, 6))
    d = d or int(rng.integers(2, 17))
    groups = [clustered_group(rng, int(rng.integers(1, max_faces + 1)), d, ident=f"p{i:03d}") for i in range(n_ids)]
    return Dataset(d, groups, source="random")


@pytest.fixture(scope="session")
def fixed_config():
    return SynthConfig(**FIXED)


@pytest.fixture(scope="session")
def fixed_ds(fixed_config):
    ds, _ = generate(fixed_config)
    ds.fingerprint  # warm the cached hash once per session
    return ds


@pytest.fixture(scope="session")
def separable():
    cfg = SynthConfig(**{**FIXED, "noise_sigma": 0.05, "dup_prob": 0.0, "holdout_per_identity": 5})
    return generate(cfg)


def pytest_terminal_summary(terminalreporter):
    if not acceptance_log.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in acceptance_log.lines():
        terminalreporter.write_line(line)

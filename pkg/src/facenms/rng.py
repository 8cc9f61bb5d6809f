"""Named random streams.

Every stream is numpy's Philox4x64 counter-based generator keyed by the
128-bit value ``(master_seed << 64) | fnv1a64(label)``. Labels are
identity ids (or fixed names such as ``"global"``), so each identity's
draws are independent of how identities are scheduled across threads.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .store import fnv1a64

_MASK64 = 0xFFFFFFFFFFFFFFFF


def check_seed(seed) -> int:
    if seed is None or isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    if not 0 <= int(seed) <= _MASK64:
        raise ConfigError(f"seed {seed} outside the unsigned 64-bit range")
    return int(seed)


def stream(seed: int, label: str) -> np.random.Generator:
    key = (check_seed(seed) << 64) | fnv1a64(label.encode("utf-8"))
    return np.random.Generator(np.random.Philox(key=key))

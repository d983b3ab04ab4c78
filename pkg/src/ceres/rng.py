"""Deterministic random streams.

All randomness in the toolkit flows through counter-based Philox
generators keyed by ``(seed, stream_index)``.  Distinct indices give
statistically independent streams without any coordination, so trials
can run in parallel and still merge into byte-identical output.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def stream(seed: int, index: int = 0) -> np.random.Generator:
    """Return the Philox generator for stream ``index`` of ``seed``."""
    key = np.array([seed & _MASK64, index & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def substream_seed(seed: int, index: int) -> int:
    """Derive a fresh 63-bit seed for trial ``index``.

    Used where an API takes a scalar seed (e.g. ``scm.sample``) but the
    caller owns a master seed plus a trial counter.
    """
    return int(stream(seed, index).integers(0, 1 << 63))

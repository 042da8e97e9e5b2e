"""Named sub-seeds derived from one master seed."""
from __future__ import annotations

import zlib

import numpy as np


def derive_seed(master_seed: int, purpose: str) -> int:
    """Stable 32-bit seed for ``purpose``; independent streams for distinct purposes."""
    key = zlib.crc32(purpose.encode("utf-8"))
    ss = np.random.SeedSequence([int(master_seed), key])
    return int(ss.generate_state(1, dtype=np.uint32)[0])

"""Named-substream randomness.

Every random draw in a run flows from one master seed through named
substreams, so enabling an attack cannot perturb topology, mining, or key
generation for unrelated components.
"""

from __future__ import annotations

import hashlib
import random


def substream_seed(master_seed: int, *labels: object) -> int:
    h = hashlib.sha256()
    h.update(master_seed.to_bytes(8, "big", signed=True))
    for label in labels:
        h.update(b"\x1f")
        h.update(str(label).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "big")


def substream(master_seed: int, *labels: object) -> random.Random:
    return random.Random(substream_seed(master_seed, *labels))

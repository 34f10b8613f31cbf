import hashlib

import numpy as np


def derive_seed(seed: int, stage: str) -> int:
    """Child seed of ``seed`` for a named stage, stable across runs and platforms."""
    digest = hashlib.sha256(f"{seed}:{stage}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def stage_rng(seed: int, stage: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, stage))

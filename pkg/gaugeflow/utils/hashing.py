import json

import numpy as np
import xxhash


def compute_hash(data: bytes, prefix: int = -1) -> int:
    h = xxhash.xxh64()
    if prefix != -1:
        # chain onto the previous digest
        h.update(prefix.to_bytes(8, "little"))
    h.update(data)
    return h.intdigest()


def config_hash(config: dict) -> str:
    """Stable digest of a run config; keys are sorted so dict order does not matter."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return f"{compute_hash(blob):016x}"


def stream_key(seed: int, op: str, index: int = 0) -> int:
    """64-bit key of the RNG stream for (seed, operation, trial index)."""
    h = compute_hash(np.array([seed], dtype=np.int64).tobytes())
    h = compute_hash(op.encode(), h)
    return compute_hash(np.array([index], dtype=np.int64).tobytes(), h)

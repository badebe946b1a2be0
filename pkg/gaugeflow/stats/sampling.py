import numpy as np
import torch

from gaugeflow.errors import ConfigError
from gaugeflow.utils.hashing import stream_key


def stream(seed: int, op: str, index: int = 0) -> np.random.Generator:
    """Counter-based generator for (seed, op, index); streams never overlap across indices."""
    return np.random.Generator(np.random.Philox(key=stream_key(seed, op, index)))


def chunks(n: int, size: int):
    for k, start in enumerate(range(0, n, size)):
        yield k, min(size, n - start)


def sample_sphere(m: int, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    g = rng.standard_normal((m,) if n is None else (n, m))
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def sample_subspace(m: int, m0: int, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """Orthonormal m×m0 frame(s) of a uniformly distributed m0-dimensional subspace."""
    if not 1 <= m0 <= m:
        raise ConfigError(f"subspace dimension needs 1 <= m0 <= m, got m={m}, m0={m0}")
    g = rng.standard_normal((m, m0) if n is None else (n, m, m0))
    q, r = np.linalg.qr(g)
    # sign fix makes the frame law invariant, not only its span
    signs = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    signs[signs == 0] = 1
    return q * signs[..., None, :]


def projection_samples(m: int, m0: int, N: int, seed: int, chunk: int = 2_000, op: str = "projection") -> np.ndarray:
    """N draws of ‖P_U n‖² for uniform m0-dimensional U and a fixed unit n, from full frames.
    The smaller of U and its complement is sampled; both are uniform."""
    n_vec = sample_sphere(m, stream(seed, op, -1))
    k = min(m0, m - m0)
    if k == 0:
        return np.ones(N)
    out = np.empty(N)
    pos = 0
    for index, size in chunks(N, chunk):
        frames = sample_subspace(m, k, stream(seed, op, index), size)
        s = (np.einsum("nmk,m->nk", frames, n_vec) ** 2).sum(-1)
        out[pos:pos + size] = s if k == m0 else 1 - s
        pos += size
    return out


def field_noise(shape: tuple[int, ...], amplitude: float, seed: int, op: str = "noise") -> torch.Tensor:
    """Uniform noise in [−amplitude, amplitude] as a float64 tensor."""
    rng = stream(seed, op)
    return torch.from_numpy(rng.uniform(-amplitude, amplitude, size=shape))

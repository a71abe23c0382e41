"""Counter-based random streams.

Every stream is a Philox4x64-10 generator keyed by ``(seed, index)``; the
top counter word carries a domain tag so phantom and noise streams for the
same index never overlap.  Uniform doubles are ``(next_uint64 >> 11) * 2**-53``
(numpy's documented conversion), and Gaussians use Box-Muller with the
convention below, so realizations can be reproduced outside numpy.
"""
import numpy as np

PHANTOM_DOMAIN = 1
NOISE_DOMAIN = 2
SHUFFLE_DOMAIN = 3

_MASK64 = (1 << 64) - 1


def stream(seed: int, index: int, domain: int) -> np.random.Generator:
    key = np.array([int(seed) & _MASK64, int(index) & _MASK64], dtype=np.uint64)
    counter = np.array([0, 0, 0, domain], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))


def box_muller(gen: np.random.Generator, size: int) -> np.ndarray:
    """``size`` standard normals from ``2 * ceil(size / 2)`` uniforms.

    For uniforms ``(u1, u2)`` in ``[0, 1)``: ``r = sqrt(-2 log(1 - u1))``,
    outputs ``r cos(2 pi u2)`` then ``r sin(2 pi u2)``.
    """
    pairs = (size + 1) // 2
    u = gen.random(2 * pairs).reshape(pairs, 2)
    r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
    phi = 2.0 * np.pi * u[:, 1]
    z = np.empty((pairs, 2))
    z[:, 0] = r * np.cos(phi)
    z[:, 1] = r * np.sin(phi)
    return z.reshape(-1)[:size]

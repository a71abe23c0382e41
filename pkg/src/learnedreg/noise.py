"""Seeded Gaussian measurement noise."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._streams import NOISE_DOMAIN, box_muller, stream
from .errors import ConfigError
from .radon import Geometry


@dataclass(frozen=True)
class NoiseSpec:
    variance: float
    seed: int = 0

    def __post_init__(self):
        if not self.variance >= 0:
            raise ConfigError(f"noise variance must be >= 0, got {self.variance}")


def standard_noise(seed: int, geometry: Geometry, sample_index: int) -> np.ndarray:
    """Unit-variance realization for one sample; scaled copies give every noise level."""
    z = box_muller(stream(seed, sample_index, NOISE_DOMAIN), geometry.num_rays)
    return z.reshape(geometry.sinogram_shape)


def sample_noise(spec: NoiseSpec, geometry: Geometry, sample_index: int) -> np.ndarray:
    """I.i.d. N(0, s^2) sinogram for ``sample_index``.

    All variances share the same underlying standard normals for a given
    ``(seed, sample_index)``.
    """
    if spec.variance == 0:
        return np.zeros(geometry.sinogram_shape)
    return np.sqrt(spec.variance) * standard_noise(spec.seed, geometry, sample_index)


def sample_noise_batch(spec: NoiseSpec, geometry: Geometry, indices) -> np.ndarray:
    indices = np.asarray(indices)
    out = np.zeros((len(indices),) + geometry.sinogram_shape)
    if spec.variance > 0:
        for row, i in enumerate(indices):
            out[row] = sample_noise(spec, geometry, int(i))
    return out


def noise_level(spec: NoiseSpec | None, stats) -> float:
    """``delta^2 = max_n Delta_n`` for spectral (or Fourier) statistics.

    ``spec`` is only carried for reporting; in the white Gaussian case the
    result concentrates around ``spec.variance``.
    """
    delta = np.asarray(stats.Delta)
    if delta.size == 0:
        raise ConfigError("empty statistics")
    return float(delta.max())

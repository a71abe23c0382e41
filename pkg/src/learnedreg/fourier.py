"""Filtered backprojection with per-angle DFT filters.

All transforms are unitary 1-D DFTs along the position axis (``norm="ortho"``),
in numpy's frequency order.  Frequencies are in cycles per unit length:
``r_j = j / (L h)`` with detector spacing ``h = sqrt(2) / L``.

A :class:`FourierFilter` stores ``rho``, the real multiplier applied to the
sinogram spectrum.  The analytic filters are derived as a ratio ``psi``
relative to a ramp (``rho = psi * ramp``); ``psi`` is kept alongside when
known.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError
from .radon import Geometry, RadonMatrix, adjoint, continuous_scaling

FILTER_KINDS = ("ramp", "hamming", "pseudo_ramp", "analytic_empirical", "learned",
                "constant", "transferred")


def frequencies(geometry: Geometry) -> np.ndarray:
    return np.fft.fftfreq(geometry.num_positions, d=geometry.position_spacing)


def sinogram_dft(f) -> np.ndarray:
    return np.fft.fft(np.asarray(f, dtype=float), axis=-1, norm="ortho")


def sinogram_idft(spectrum) -> np.ndarray:
    return np.fft.ifft(spectrum, axis=-1, norm="ortho")


@dataclass(frozen=True)
class FourierFilter:
    geometry: Geometry
    rho: np.ndarray
    provenance: str
    angle_constant: bool = False
    psi: np.ndarray | None = None

    def __post_init__(self):
        if self.provenance not in FILTER_KINDS:
            raise ConfigError(f"unknown filter provenance {self.provenance!r}")
        rho = np.asarray(self.rho, dtype=float)
        if rho.shape == (self.geometry.num_positions,):
            rho = np.broadcast_to(rho, self.geometry.sinogram_shape).copy()
        if rho.shape != self.geometry.sinogram_shape:
            raise DimensionError(f"filter shape {rho.shape} does not match "
                                 f"{self.geometry.sinogram_shape}")
        if not np.all(np.isfinite(rho)):
            raise ConfigError("filter values must be finite")
        if self.angle_constant and not np.all(rho == rho[:1]):
            raise ConfigError("angle_constant filter has differing rows")
        object.__setattr__(self, "rho", rho)

    @property
    def r(self) -> np.ndarray:
        return frequencies(self.geometry)

    def export_csv(self, path) -> None:
        """Rows ``angle_index, frequency_r, psi, rho`` in numpy frequency order."""
        r = self.r
        psi = self.psi if self.psi is not None else np.full(self.rho.shape, np.nan)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["angle_index", "frequency_r", "psi", "rho"])
            for k in range(self.rho.shape[0]):
                for j in range(self.rho.shape[1]):
                    w.writerow([k, repr(float(r[j])), repr(float(psi[k, j])),
                                repr(float(self.rho[k, j]))])


def apply_filter(f, filt: FourierFilter, return_residue: bool = False):
    """Per-angle multiplication by ``filt.rho`` in the DFT domain; real part is returned.

    With ``return_residue`` the largest discarded imaginary magnitude is
    returned too.
    """
    f = np.asarray(f, dtype=float)
    if f.shape[-2:] != filt.geometry.sinogram_shape:
        raise DimensionError(f"sinogram shape {f.shape} vs filter {filt.rho.shape}")
    out = sinogram_idft(filt.rho * sinogram_dft(f))
    if return_residue:
        return out.real, float(np.abs(out.imag).max(initial=0.0))
    return out.real


def fbp_reconstruct(op: RadonMatrix, filt: FourierFilter, f) -> np.ndarray:
    """``(I^2 sqrt(2) pi / (K L)) A^T (filtered f)``; the prefactor discretizes the continuous adjoint."""
    scale = continuous_scaling(op.geometry).adjoint_factor
    return scale * adjoint(op, apply_filter(f, filt))


def ramp(geometry: Geometry) -> np.ndarray:
    return np.abs(frequencies(geometry))


def classical_filter(kind: str, geometry: Geometry) -> FourierFilter:
    """Discretized ramp ``|r|``, or ramp times a Hamming window (0.54 + 0.46 cos(pi r / r_max))."""
    r = ramp(geometry)
    if kind == "ramp":
        values = r
    elif kind == "hamming":
        r_max = r.max()
        window = 0.54 + 0.46 * np.cos(np.pi * r / r_max) if r_max > 0 else np.ones_like(r)
        values = r * window
    else:
        raise ConfigError(f"unknown classical filter {kind!r}")
    return FourierFilter(geometry, values, kind, angle_constant=True,
                         psi=np.broadcast_to(np.where(r > 0, values / np.where(r > 0, r, 1), 0),
                                             geometry.sinogram_shape).copy())


@dataclass(frozen=True)
class FourierStats:
    """Per-bin moments of the sinogram spectra (unitary DFT).

    ``Gamma`` is ``mean(F(Au) conj(F nu) + conj(F(Au)) F nu)``, i.e. twice the
    real cross-correlation.
    """

    Pi: np.ndarray
    Delta: np.ndarray
    Gamma: np.ndarray
    sample_count: int


def compute_fourier_stats(clean_sinograms, noises, chunk: int = 256) -> FourierStats:
    clean = np.asarray(clean_sinograms, dtype=float)
    noises = np.asarray(noises, dtype=float)
    if clean.shape != noises.shape:
        raise DimensionError(f"clean {clean.shape} vs noise {noises.shape}")
    if clean.ndim != 3 or len(clean) == 0:
        raise DimensionError("expected a non-empty stack of sinograms")
    n = len(clean)
    # chunked running sums keep memory flat; fixed chunk order keeps results reproducible
    pi = np.zeros(clean.shape[1:])
    delta = np.zeros(clean.shape[1:])
    gamma = np.zeros(clean.shape[1:])
    for start in range(0, n, chunk):
        a = sinogram_dft(clean[start:start + chunk])
        b = sinogram_dft(noises[start:start + chunk])
        pi += np.sum(np.abs(a) ** 2, axis=0)
        delta += np.sum(np.abs(b) ** 2, axis=0)
        gamma += np.sum(2.0 * (a * b.conj()).real, axis=0)
    return FourierStats(pi / n, delta / n, gamma / n, n)


def analytic_filter_empirical(stats: FourierStats, geometry: Geometry,
                              base: np.ndarray | None = None) -> FourierFilter:
    """Per-bin empirical least-squares filter ``psi = (Pi + Gamma/2) / (Pi + Delta + Gamma)``.

    ``psi`` is the ratio to an exact inversion filter; the applied multiplier
    is ``rho = psi * base`` with ``base`` the discretized ramp unless a
    (pseudo-)ramp is supplied.  Bins with a vanishing denominator get 0.
    """
    num = stats.Pi + 0.5 * stats.Gamma
    den = stats.Pi + stats.Delta + stats.Gamma
    psi = np.zeros(den.shape)
    np.divide(num, den, out=psi, where=den > 0)
    if base is None:
        base = ramp(geometry)
    base = np.broadcast_to(np.asarray(base, dtype=float), geometry.sinogram_shape)
    return FourierFilter(geometry, psi * base, "analytic_empirical", psi=psi)


def angle_average(filt: FourierFilter) -> FourierFilter:
    if filt.angle_constant:
        return filt
    rho = np.broadcast_to(filt.rho.mean(axis=0), filt.rho.shape).copy()
    psi = None
    if filt.psi is not None:
        psi = np.broadcast_to(filt.psi.mean(axis=0), filt.psi.shape).copy()
    return FourierFilter(filt.geometry, rho, filt.provenance, angle_constant=True, psi=psi)

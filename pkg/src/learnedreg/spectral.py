"""Spectral (singular-value) regularization of the discrete Radon matrix.

The thin SVD is stored in the convention ``A = V diag(sigma) U^T``: columns of
``U`` (pixels x R) are image-space singular vectors ``u_n``, columns of ``V``
(rays x R) are data-space singular vectors ``v_n``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, ConfigError, DimensionError
from .radon import RadonMatrix, adjoint

DEFAULT_MEMORY_BUDGET = 2 * 1024**3  # bytes

PROVENANCES = ("analytic_population", "analytic_empirical", "learned",
               "tikhonov", "tsvd", "pseudo_inverse", "transferred")


@dataclass(frozen=True)
class OperatorSVD:
    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    @property
    def rank(self) -> int:
        return self.sigma.size

    def image_coefficients(self, images) -> np.ndarray:
        """``<u^i, u_n>`` for a stack of images, shape ``(N, R)``."""
        flat = np.asarray(images, dtype=float).reshape(-1, self.U.shape[0])
        return flat @ self.U

    def data_coefficients(self, sinograms) -> np.ndarray:
        """``<f^i, v_n>`` for a stack of sinograms, shape ``(N, R)``."""
        flat = np.asarray(sinograms, dtype=float).reshape(-1, self.V.shape[0])
        return flat @ self.V


def _as_dense(op):
    if isinstance(op, RadonMatrix):
        return op.toarray()
    if hasattr(op, "toarray"):
        return op.toarray()
    return np.asarray(op, dtype=float)


def compute_svd(op, truncation_tol: float = 1e-12,
                memory_budget: int = DEFAULT_MEMORY_BUDGET) -> OperatorSVD:
    """Thin SVD of a Radon matrix (or any 2-D array) with relative truncation.

    Singular values below ``truncation_tol * sigma_1`` are dropped.  Raises
    :class:`CapacityError` if the dense matrix plus factors would exceed
    ``memory_budget`` bytes.
    """
    m, n = op.shape
    k = min(m, n)
    need = 8 * (m * n + m * k + k * n + k) * 2  # matrix, factors, LAPACK workspace
    if need > memory_budget:
        raise CapacityError(
            f"dense SVD of a {m}x{n} matrix needs ~{need / 2**30:.1f} GiB, budget is "
            f"{memory_budget / 2**30:.1f} GiB; reduce the image size")
    a = _as_dense(op)
    left, s, right_t = np.linalg.svd(a, full_matrices=False)
    keep = s >= truncation_tol * s[0] if s.size and s[0] > 0 else np.zeros(s.size, bool)
    keep &= s > 0
    # fix signs so the largest-magnitude entry of each u_n is positive
    U = right_t[keep].T
    V = left[:, keep]
    flip = np.sign(U[np.abs(U).argmax(axis=0), np.arange(U.shape[1])])
    flip[flip == 0] = 1.0
    return OperatorSVD(U=U * flip, sigma=s[keep], V=V * flip)


@dataclass(frozen=True)
class SpectralStats:
    Pi: np.ndarray
    Delta: np.ndarray
    Gamma: np.ndarray
    sample_count: int
    noise_variance: float | None = None


def compute_spectral_stats(svd: OperatorSVD, images, noises,
                           noise_variance: float | None = None) -> SpectralStats:
    """Empirical second moments in the singular basis.

    ``Pi_n = mean <u,u_n>^2``, ``Delta_n = mean <nu,v_n>^2`` and
    ``Gamma_n = mean <u,u_n><nu,v_n>``.  Means use numpy's pairwise summation
    along the sample axis, so results do not depend on thread count.
    """
    images = np.asarray(images, dtype=float)
    noises = np.asarray(noises, dtype=float)
    if len(images) != len(noises):
        raise DimensionError(f"{len(images)} images but {len(noises)} noise samples")
    if len(images) == 0:
        raise DimensionError("need at least one sample")
    a = svd.image_coefficients(images)
    c = svd.data_coefficients(noises)
    return SpectralStats(Pi=np.mean(a * a, axis=0), Delta=np.mean(c * c, axis=0),
                         Gamma=np.mean(a * c, axis=0), sample_count=len(images),
                         noise_variance=noise_variance)


@dataclass(frozen=True)
class SpectralCoefficients:
    g: np.ndarray
    provenance: str
    noise_variance: float | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ConfigError(f"unknown provenance {self.provenance!r}")
        if not np.all(np.isfinite(self.g)):
            raise ConfigError("coefficients must be finite")


def _safe_ratio(num, den):
    num, den = np.broadcast_arrays(np.asarray(num, float), np.asarray(den, float))
    out = np.zeros(num.shape)
    np.divide(num, den, out=out, where=den != 0)
    return out


def _check_moments(sigma, *arrays):
    sigma = np.asarray(sigma, dtype=float)
    out = [np.asarray(a, dtype=float) for a in arrays]
    for a in out:
        if a.shape != sigma.shape:
            raise DimensionError(f"length mismatch: {a.shape} vs sigma {sigma.shape}")
    return sigma, out


def optimal_coefficients_population(sigma, Pi, Delta,
                                    noise_variance=None) -> SpectralCoefficients:
    """Minimizer of ``sum (1 - sigma g)^2 Pi + g^2 Delta``: ``sigma Pi / (sigma^2 Pi + Delta)``."""
    sigma, (Pi, Delta) = _check_moments(sigma, Pi, Delta)
    if np.any(Pi < 0) or np.any(Delta < 0):
        raise ConfigError("Pi and Delta must be non-negative")
    g = _safe_ratio(sigma * Pi, sigma**2 * Pi + Delta)
    return SpectralCoefficients(g, "analytic_population", noise_variance)


def optimal_coefficients_empirical(sigma, stats: SpectralStats) -> SpectralCoefficients:
    """Exact minimizer of the empirical risk, including the cross term ``Gamma``.

    Per mode this is the least-squares fit of ``<u, u_n>`` on the data
    coefficient ``<f, v_n> = sigma_n <u, u_n> + <nu, v_n>``:
    ``(sigma Pi + Gamma) / (sigma^2 Pi + Delta + 2 sigma Gamma)``.  The
    denominator is the mean squared data coefficient.  May be negative; zero
    where the denominator vanishes.
    """
    sigma, (Pi, Delta, Gamma) = _check_moments(sigma, stats.Pi, stats.Delta, stats.Gamma)
    g = _safe_ratio(sigma * Pi + Gamma, sigma**2 * Pi + Delta + 2 * sigma * Gamma)
    return SpectralCoefficients(g, "analytic_empirical", stats.noise_variance)


def classical_coefficients(kind: str, sigma, param: float | None = None) -> SpectralCoefficients:
    """``tikhonov`` (``param`` = alpha > 0), ``tsvd`` (``param`` = tau >= 0) or ``pseudo_inverse``."""
    sigma = np.asarray(sigma, dtype=float)
    if kind == "tikhonov":
        if param is None or not param > 0:
            raise ConfigError("tikhonov needs alpha > 0")
        g = sigma / (sigma**2 + param)
    elif kind == "tsvd":
        if param is None or not param >= 0:
            raise ConfigError("tsvd needs tau >= 0")
        g = np.where(sigma >= param, 1.0 / sigma, 0.0)
    elif kind == "pseudo_inverse":
        g = 1.0 / sigma
    else:
        raise ConfigError(f"unknown classical regularization {kind!r}")
    params = {} if param is None else {"param": float(param)}
    return SpectralCoefficients(g, kind, None, params)


def _coeffs(g):
    return np.asarray(g.g if isinstance(g, SpectralCoefficients) else g, dtype=float)


def reconstruct_spectral(op: RadonMatrix, svd: OperatorSVD, g, f) -> np.ndarray:
    """``A^T V diag(g / sigma) V^T f`` for one sinogram or a stack."""
    g = _coeffs(g)
    if g.shape != svd.sigma.shape:
        raise DimensionError(f"{g.size} coefficients for rank {svd.rank}")
    c = svd.data_coefficients(f)
    filtered = (c * (g / svd.sigma)) @ svd.V.T
    f = np.asarray(f)
    batch = f.shape[:-2] if f.shape[-2:] == op.geometry.sinogram_shape else f.shape[:-1]
    return adjoint(op, filtered.reshape(batch + (svd.V.shape[0],)))


def reconstruct_series(svd: OperatorSVD, g, f, image_shape=None) -> np.ndarray:
    """Direct expansion ``sum_n g_n <f, v_n> u_n``; same result as :func:`reconstruct_spectral`."""
    g = _coeffs(g)
    out = (svd.data_coefficients(f) * g) @ svd.U.T
    if image_shape is not None:
        out = out.reshape((-1,) + tuple(image_shape))
    return out


def spectral_objective(g, sigma, Pi, Delta, Gamma=None):
    """Risk ``sum (1 - sigma g)^2 Pi + g^2 Delta - 2 (1 - sigma g) g Gamma`` (Gamma optional).

    This is the mean of ``((1 - sigma g) <u,u_n> - g <nu,v_n>)^2`` summed over modes.
    """
    g, sigma, Pi, Delta = (np.asarray(x, float) for x in (g, sigma, Pi, Delta))
    value = (1 - sigma * g) ** 2 * Pi + g**2 * Delta
    if Gamma is not None:
        value = value - 2 * (1 - sigma * g) * g * np.asarray(Gamma, float)
    return float(np.sum(value))


def expected_error(sigma, Pi, Delta) -> float:
    """Optimal expected squared error ``sum Delta Pi / (sigma^2 Pi + Delta)``."""
    sigma, (Pi, Delta) = _check_moments(sigma, Pi, Delta)
    return float(np.sum(_safe_ratio(Delta * Pi, sigma**2 * Pi + Delta)))


def expected_smoothness(sigma, Pi, Delta) -> np.ndarray:
    """Second moments of optimal reconstructions: ``sigma^2 Pi^2 / (sigma^2 Pi + Delta)``.

    Where ``sigma^2 Pi + Delta = 0`` the value is 0 (then ``Pi = 0`` as well).
    """
    sigma, (Pi, Delta) = _check_moments(sigma, Pi, Delta)
    return _safe_ratio(sigma**2 * Pi, sigma**2 * Pi + Delta) * Pi


def range_condition_weights(sigma, Pi, Delta) -> np.ndarray:
    """``Delta^2 / (Pi^2 sigma^2)`` per mode; ``inf`` marks modes with ``Pi_n = 0``."""
    sigma, (Pi, Delta) = _check_moments(sigma, Pi, Delta)
    den = Pi**2 * sigma**2
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(den > 0, Delta**2 / np.where(den > 0, den, 1.0), np.inf)
    return w


def export_coefficients_csv(path, sigma, stats: SpectralStats, g, g_tikhonov=None) -> None:
    """Per-mode table ``n, sigma_n, Pi_n, Delta_n, Gamma_n, g_n, g_tikhonov, weight_range_condition``."""
    g = _coeffs(g)
    if g_tikhonov is None:
        g_tikhonov = np.full_like(g, np.nan)
    g_tikhonov = _coeffs(g_tikhonov)
    weights = range_condition_weights(sigma, stats.Pi, stats.Delta)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "sigma_n", "Pi_n", "Delta_n", "Gamma_n", "g_n", "g_tikhonov",
                    "weight_range_condition"])
        for n in range(len(sigma)):
            w.writerow([n + 1] + [repr(float(x)) for x in (
                sigma[n], stats.Pi[n], stats.Delta[n], stats.Gamma[n], g[n],
                g_tikhonov[n], weights[n])])

"""Mini-batch optimization of spectral coefficients and Fourier filters.

Both training losses are ``(1/N) sum_i ||u^i - R(f^i; params)||^2`` and are
quadratic in the parameters, so gradients are written out explicitly.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ._streams import SHUFFLE_DOMAIN, stream
from .errors import CapacityError, ConfigError, DimensionError, TrainingError
from .fourier import FourierFilter, sinogram_dft, sinogram_idft
from .radon import RadonMatrix, continuous_scaling
from .spectral import OperatorSVD, SpectralCoefficients, reconstruct_spectral


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    epochs: int = 50
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    optimizer: str = "adam"  # or "gd" (plain gradient descent)
    seed: int = 0
    early_stop_tol: float = 1e-10
    divergence_factor: float = 1e3

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.optimizer not in ("adam", "gd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")

    def to_dict(self):
        return asdict(self)


class Adam:
    """Adaptive moment estimation (Kingma & Ba) for a single parameter array."""

    def __init__(self, shape, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, params, grad):
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class GradientDescent:
    def __init__(self, shape, lr):
        self.lr = lr

    def step(self, params, grad):
        return params - self.lr * grad


class SpectralProblem:
    """Training data for spectral coefficients, reduced to singular-basis coordinates.

    Since ``A^T v_n = sigma_n u_n``, the reconstruction through the factored
    form equals ``sum_n g_n <f, v_n> u_n``; the loss splits into per-mode
    terms plus the part of each image outside ``span(U)``.
    """

    def __init__(self, svd: OperatorSVD, images, sinograms):
        images = np.asarray(images, dtype=float)
        sinograms = np.asarray(sinograms, dtype=float)
        if len(images) != len(sinograms) or len(images) == 0:
            raise DimensionError("need matching, non-empty image and sinogram stacks")
        self.svd = svd
        self.a = svd.image_coefficients(images)
        self.c = svd.data_coefficients(sinograms)
        norms = np.sum(images.reshape(len(images), -1) ** 2, axis=1)
        self.perp = np.maximum(norms - np.sum(self.a**2, axis=1), 0.0)

    def __len__(self):
        return len(self.a)

    @property
    def n_params(self):
        return self.svd.rank

    def loss(self, g, idx=None):
        a, c, perp = self._select(idx)
        return float(np.mean(perp + np.sum((a - g * c) ** 2, axis=1)))

    def loss_and_grad(self, g, idx=None):
        a, c, perp = self._select(idx)
        resid = a - g * c
        loss = float(np.mean(perp + np.sum(resid**2, axis=1)))
        grad = -2.0 * np.mean(c * resid, axis=0)
        return loss, grad

    def hessian_diagonal(self):
        return 2.0 * np.mean(self.c**2, axis=0)

    def _select(self, idx):
        if idx is None:
            return self.a, self.c, self.perp
        return self.a[idx], self.c[idx], self.perp[idx]


def spectral_loss_pixel(op: RadonMatrix, svd: OperatorSVD, g, images, sinograms) -> float:
    """Training loss evaluated through full image reconstructions."""
    recon = reconstruct_spectral(op, svd, g, sinograms)
    diff = np.asarray(images, dtype=float) - recon
    return float(np.mean(np.sum(diff.reshape(len(diff), -1) ** 2, axis=1)))


class FourierProblem:
    """Training data for a filtered backprojection filter.

    Parameters are either a full ``(K, L)`` array or, with
    ``angle_constant``, one length-``L`` row shared by all angles.
    """

    def __init__(self, op: RadonMatrix, images, sinograms, angle_constant: bool = False):
        images = np.asarray(images, dtype=float)
        sinograms = np.asarray(sinograms, dtype=float)
        if len(images) != len(sinograms) or len(images) == 0:
            raise DimensionError("need matching, non-empty image and sinogram stacks")
        g = op.geometry
        self.op = op
        self.angle_constant = angle_constant
        self.scale = continuous_scaling(g).adjoint_factor
        self.u = images.reshape(len(images), g.num_pixels)
        self.spectra = sinogram_dft(sinograms.reshape((len(images),) + g.sinogram_shape))

    def __len__(self):
        return len(self.u)

    @property
    def param_shape(self):
        g = self.op.geometry
        return (g.num_positions,) if self.angle_constant else g.sinogram_shape

    @property
    def n_params(self):
        return int(np.prod(self.param_shape))

    def _rho(self, params):
        return np.broadcast_to(params, self.op.geometry.sinogram_shape)

    def apply(self, params, idx=None):
        """Flattened reconstructions ``(B, I*I)`` for the selected samples."""
        spectra = self.spectra if idx is None else self.spectra[idx]
        filtered = sinogram_idft(self._rho(params) * spectra).real
        flat = filtered.reshape(len(filtered), -1)
        return self.scale * (self.op._matrix_t @ flat.T).T

    def apply_transpose(self, images, idx=None):
        """Adjoint of ``params -> apply(params)`` summed over the selected samples."""
        spectra = self.spectra if idx is None else self.spectra[idx]
        w = self.scale * (self.op.matrix @ np.asarray(images).T).T
        w_hat = sinogram_dft(w.reshape(spectra.shape))
        out = np.sum((w_hat.conj() * spectra).real, axis=0)
        return out.sum(axis=0) if self.angle_constant else out

    def loss(self, params, idx=None):
        u = self.u if idx is None else self.u[idx]
        return float(np.mean(np.sum((u - self.apply(params, idx)) ** 2, axis=1)))

    def loss_and_grad(self, params, idx=None):
        u = self.u if idx is None else self.u[idx]
        resid = u - self.apply(params, idx)
        loss = float(np.mean(np.sum(resid**2, axis=1)))
        grad = -2.0 * self.apply_transpose(resid, idx) / len(u)
        return loss, grad


def _half_spectrum_map(num_positions):
    """Index of the non-negative frequency bin each DFT bin shares its value with."""
    j = np.arange(num_positions)
    return np.minimum(j, (num_positions - j) % num_positions)


def fourier_normal_equations(problem: FourierProblem, memory_budget: int = 2 * 1024**3):
    """Gram matrix and right-hand side of the Fourier training loss on symmetric filters.

    The loss is ``theta^T G theta - 2 b^T theta + mean ||u||^2`` where
    ``theta`` holds one value per angle and non-negative frequency
    (``K * (L//2 + 1)`` values, or ``L//2 + 1`` with ``angle_constant``).
    Real sinograms make the columns for ``+r`` and ``-r`` identical, so
    symmetric filters lose nothing.

    ``G`` is assembled from the sample spectra ``z`` and the DFT-conjugated
    blocks of ``M = A A^T``:
    ``G_pq = c^2 / 2 Re[S_pq Q_pq + T_pq Q'_pq]`` with ``S = mean z z^T``,
    ``T = mean z conj(z)^T``, ``Q = Phi^T M Phi``, ``Q' = Phi^T M conj(Phi)``.
    """
    geo = problem.op.geometry
    k, l = geo.sinogram_shape
    m = k * l
    if 16 * 6 * m * m > memory_budget:
        raise CapacityError(f"Gram assembly for {m} filter values exceeds the memory budget")
    n = len(problem)
    z = problem.spectra.reshape(n, m)
    s_mat = (z.T @ z) / n
    t_mat = (z.T @ z.conj()) / n
    mm = (problem.op.matrix @ problem.op.matrix.T).toarray().reshape(k, l, k, l)
    q = np.fft.ifft(np.fft.ifft(mm, axis=1, norm="ortho"), axis=3, norm="ortho").reshape(m, m)
    q2 = np.fft.fft(np.fft.ifft(mm, axis=1, norm="ortho"), axis=3, norm="ortho").reshape(m, m)
    del mm
    gram = 0.5 * problem.scale**2 * (s_mat * q + t_mat * q2).real
    del s_mat, t_mat, q, q2
    w_hat = sinogram_dft(problem.scale * (problem.op.matrix @ problem.u.T).T.reshape(n, k, l))
    rhs = np.sum((w_hat.conj() * problem.spectra).real, axis=0).reshape(-1) / n

    half = _half_spectrum_map(l)
    n_half = l // 2 + 1
    proj = np.zeros((m, k * n_half))
    proj[np.arange(m), (np.arange(k)[:, None] * n_half + half[None, :]).reshape(-1)] = 1.0
    if problem.angle_constant:
        proj = proj.reshape(m, k, n_half).sum(axis=1)
    gram_half = proj.T @ gram @ proj
    rhs_half = proj.T @ rhs
    const = float(np.mean(np.sum(problem.u**2, axis=1)))
    return gram_half, rhs_half, const


def fourier_least_squares(problem: FourierProblem, rcond: float = 1e-13):
    """Exact minimizer of the Fourier training loss (symmetric in frequency).

    Returns ``(params, loss)`` with ``params`` in the problem's parameter shape.
    """
    gram, rhs, const = fourier_normal_equations(problem)
    w, vecs = np.linalg.eigh(gram)
    keep = w > rcond * w.max()
    theta = vecs[:, keep] @ ((vecs[:, keep].T @ rhs) / w[keep])
    l = problem.op.geometry.num_positions
    half = _half_spectrum_map(l)
    if problem.angle_constant:
        params = theta[half]
    else:
        params = theta.reshape(-1, l // 2 + 1)[:, half]
    loss = const - float(rhs @ theta)
    return params, loss


def _optimizer(cfg: TrainConfig, shape):
    if cfg.optimizer == "adam":
        return Adam(shape, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    return GradientDescent(shape, cfg.learning_rate)


def fit(problem, cfg: TrainConfig, init=None, val_problem=None):
    """Run mini-batch training from ``init`` (zeros by default).

    Returns ``(params, trace)`` where ``trace`` is a list of
    ``(epoch, train_loss, val_loss)``; epoch 0 is the initial point.  Stops
    early once the full-set loss changes by less than
    ``cfg.early_stop_tol`` relative.
    """
    shape = getattr(problem, "param_shape", (problem.n_params,))
    params = np.zeros(shape) if init is None else np.array(init, dtype=float).reshape(shape)
    opt = _optimizer(cfg, shape)
    n = len(problem)

    def record(epoch):
        val = val_problem.loss(params) if val_problem is not None else float("nan")
        trace.append((epoch, problem.loss(params), val))

    trace = []
    record(0)
    initial = trace[0][1]
    for epoch in range(1, cfg.epochs + 1):
        order = stream(cfg.seed, epoch, SHUFFLE_DOMAIN).permutation(n)
        for start in range(0, n, cfg.batch_size):
            _, grad = problem.loss_and_grad(params, order[start:start + cfg.batch_size])
            params = opt.step(params, grad)
        record(epoch)
        current = trace[-1][1]
        if not np.isfinite(current) or current > cfg.divergence_factor * max(initial, 1e-300):
            raise TrainingError(f"training diverged at epoch {epoch} (loss {current:.3e})", trace)
        previous = trace[-2][1]
        if abs(previous - current) <= cfg.early_stop_tol * max(abs(previous), 1e-300):
            break
    return params, trace


def train_spectral(svd: OperatorSVD, images, sinograms, cfg: TrainConfig,
                   val=None, noise_variance=None):
    """Learn spectral coefficients from ``(image, noisy sinogram)`` pairs.

    ``val`` is an optional ``(images, sinograms)`` pair for the validation
    column of the trace.
    """
    problem = SpectralProblem(svd, images, sinograms)
    val_problem = SpectralProblem(svd, *val) if val is not None else None
    g, trace = fit(problem, cfg, val_problem=val_problem)
    coeffs = SpectralCoefficients(g, "learned", noise_variance, {"train": cfg.to_dict()})
    return coeffs, trace


def train_fourier(op: RadonMatrix, images, sinograms, cfg: TrainConfig,
                  angle_constant: bool = False, val=None, provenance="learned"):
    """Learn a real filter by backpropagating through filtered backprojection."""
    problem = FourierProblem(op, images, sinograms, angle_constant)
    val_problem = FourierProblem(op, *val, angle_constant) if val is not None else None
    params, trace = fit(problem, cfg, val_problem=val_problem)
    rho = np.broadcast_to(params, op.geometry.sinogram_shape).copy()
    return FourierFilter(op.geometry, rho, provenance, angle_constant=angle_constant), trace


def gradient_check(objective, gradient, params, direction, step: float = 1e-5) -> float:
    """Relative gap between ``<gradient(params), direction>`` and a central difference."""
    params = np.asarray(params, dtype=float)
    direction = np.asarray(direction, dtype=float)
    hi = objective(params + step * direction)
    lo = objective(params - step * direction)
    if not (np.isfinite(hi) and np.isfinite(lo)):
        raise ValueError("objective is not finite near params")
    numeric = (hi - lo) / (2 * step)
    analytic = float(np.sum(np.asarray(gradient(params)) * direction))
    scale = max(abs(analytic), abs(numeric), 1e-300)
    return abs(numeric - analytic) / scale

"""Learned spectral regularization and learned FBP filters for discrete Radon inversion."""
from .errors import CapacityError, ConfigError, DimensionError, FormatError, TrainingError
from .radon import Geometry, RadonMatrix, adjoint, build_operator, continuous_scaling, forward
from .phantoms import (Dataset, DatasetManifest, GeneratorParams, generate_dataset,
                       generate_phantom, load_dataset, save_dataset)
from .noise import NoiseSpec, sample_noise, sample_noise_batch
from .spectral import (OperatorSVD, SpectralCoefficients, compute_spectral_stats, compute_svd,
                       optimal_coefficients_empirical, optimal_coefficients_population,
                       reconstruct_spectral)
from .fourier import FourierFilter, classical_filter, fbp_reconstruct, ramp
from .training import TrainConfig, train_fourier, train_spectral
from .metrics import evaluate, mse, psnr, ssim

__version__ = "0.1.0"

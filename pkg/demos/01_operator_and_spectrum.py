"""Build a Radon matrix, look at its singular values, and see why plain inversion fails.

Run: python demos/01_operator_and_spectrum.py
"""
import numpy as np

import learnedreg as lr

geometry = lr.Geometry(image_size=24, num_angles=48, num_positions=35)
op = lr.build_operator(geometry)
print(f"Radon matrix: {op.shape[0]} rays x {op.shape[1]} pixels, {op.matrix.nnz} non-zeros")

# Each row holds the chord lengths of one ray through the pixels of the unit square.
phantom = lr.generate_phantom(seed=7, params=lr.GeneratorParams(image_size=24))
sinogram = lr.forward(op, phantom)
print(f"phantom mass {phantom.sum() / 24**2:.4f}, "
      f"mean projection per angle {sinogram.sum(axis=1).mean() * np.sqrt(2) / 35:.4f}")

svd = lr.compute_svd(op)
s = svd.sigma
print(f"rank {svd.rank}, sigma_1 = {s[0]:.4f}, sigma_R = {s[-1]:.2e}, "
      f"condition number {s[0] / s[-1]:.1e}")
for q in (0.0, 0.25, 0.5, 0.75, 1.0):
    n = min(int(q * svd.rank), svd.rank - 1)
    print(f"  sigma_{n + 1:<4d} = {s[n]:.3e}")

# Small singular values amplify noise: compare the pseudo-inverse with and without noise.
noise = lr.sample_noise(lr.NoiseSpec(variance=1e-4, seed=1), geometry, 0)
pinv = lr.spectral.classical_coefficients("pseudo_inverse", s)
clean_rec = lr.reconstruct_spectral(op, svd, pinv, sinogram)
noisy_rec = lr.reconstruct_spectral(op, svd, pinv, sinogram + noise)
print(f"pseudo-inverse MSE: clean data {lr.mse(phantom, clean_rec):.2e}, "
      f"noisy data (s^2=1e-4) {lr.mse(phantom, noisy_rec):.2e}")

for alpha in (1e-4, 1e-3, 1e-2):
    tik = lr.spectral.classical_coefficients("tikhonov", s, alpha)
    rec = lr.reconstruct_spectral(op, svd, tik, sinogram + noise)
    print(f"Tikhonov alpha={alpha:g}: MSE {lr.mse(phantom, rec):.2e}")

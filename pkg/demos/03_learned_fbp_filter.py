"""Filtered backprojection: classical ramp filters versus a filter learned from data.

Run: python demos/03_learned_fbp_filter.py
"""
import numpy as np

import learnedreg as lr
from learnedreg.fourier import analytic_filter_empirical, compute_fourier_stats

geometry = lr.Geometry(24, 48, 35)
op = lr.build_operator(geometry)
manifest = lr.DatasetManifest(seed=3, count=400, split=(0.7, 0.1, 0.2),
                              generator_params=lr.GeneratorParams(image_size=24))
data = lr.generate_dataset(manifest)
spec = lr.NoiseSpec(0.005, seed=3)


def pairs(split):
    idx = data.indices(split)
    images = data.images[idx]
    clean = lr.forward(op, images)
    return images, clean, lr.sample_noise_batch(spec, geometry, idx)


train_u, train_clean, train_noise = pairs("train")
test_u, test_clean, test_noise = pairs("test")
test_f = test_clean + test_noise

filters = {kind: lr.classical_filter(kind, geometry) for kind in ("ramp", "hamming")}
filters["learned"], _ = lr.train_fourier(op, train_u, train_clean + train_noise,
                                         lr.TrainConfig(epochs=30, learning_rate=0.1))
filters["per-bin optimum"] = analytic_filter_empirical(
    compute_fourier_stats(train_clean, train_noise), geometry)

for name, filt in filters.items():
    m = lr.evaluate(test_u, lr.fbp_reconstruct(op, filt, test_f))
    print(f"{name:16s} MSE {m['mse']:.5f}  PSNR {m['psnr']:6.2f} dB  SSIM {m['ssim']:.3f}")

# The learned multiplier, averaged over angles, next to the ramp it started from.
r = lr.fourier.frequencies(geometry)
order = np.argsort(r)
learned = filters["learned"].rho.mean(axis=0)
print("\n  frequency    ramp   learned")
for j in order[:: max(1, len(order) // 9)]:
    print(f"  {r[j]:9.2f} {filters['ramp'].rho[0, j]:7.2f} {learned[j]:9.2f}")

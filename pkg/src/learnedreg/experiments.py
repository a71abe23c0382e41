"""Configuration-driven experiments: approach comparison, noise sweep,
oversmoothing diagnostics and resolution transfer.

Every function writes plain JSON/CSV into an output directory.  Output
files depend only on the configuration (wall-clock timings go to a separate
``timing.json``), so repeated runs are byte-identical on one platform.
"""
from __future__ import annotations

import copy
import csv
import json
import math
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import metrics
from .errors import ConfigError
from .fourier import (FourierFilter, analytic_filter_empirical, compute_fourier_stats,
                      fbp_reconstruct, frequencies)
from .noise import NoiseSpec, noise_level, sample_noise_batch
from .phantoms import DatasetManifest, GeneratorParams, generate_dataset
from .radon import Geometry, build_operator, continuous_scaling, forward
from .spectral import (SpectralCoefficients, compute_spectral_stats, compute_svd,
                       expected_error, expected_smoothness, export_coefficients_csv,
                       optimal_coefficients_empirical, optimal_coefficients_population,
                       range_condition_weights, reconstruct_spectral)
from .training import (FourierProblem, SpectralProblem, TrainConfig, fourier_least_squares,
                       train_fourier, train_spectral)

APPROACHES = ("svd_analytic", "svd_learned", "fft_learned", "fft_analytic")
NOISE_UNITS = ("unit_square", "pixel")


@dataclass(frozen=True)
class ExperimentConfig:
    """All knobs for one experiment; ``seed`` drives every random stream.

    ``noise_units="pixel"`` treats the noise variances as given for
    sinograms measured in pixel-width units, i.e. the variance applied to the
    unit-square sinograms is divided by ``I**2``.
    """

    geometry: Geometry = Geometry(32, 64, 47)
    count: int = 2000
    split: tuple[float, float, float] = (0.64, 0.16, 0.20)
    generator: dict = field(default_factory=dict)
    noise_variances: tuple[float, ...] = (0.0, 0.005, 0.01, 0.015)
    noise_units: str = "unit_square"
    approaches: tuple[str, ...] = APPROACHES
    spectral_train: TrainConfig = TrainConfig(epochs=100, learning_rate=1e-2)
    fourier_train: TrainConfig = TrainConfig(epochs=40, learning_rate=0.1)
    fft_angle_constant: bool = False
    svd_truncation: float = 1e-12
    svd_memory_gib: float = 2.0
    sweep_variances: tuple[float, ...] = (1e-2, 1e-3, 1e-4, 1e-5)
    mc_repeats: int = 1
    oversmoothing_variance: float = 0.005
    seed: int = 0

    def __post_init__(self):
        if not self.approaches:
            raise ConfigError("at least one approach is required")
        unknown = set(self.approaches) - set(APPROACHES)
        if unknown:
            raise ConfigError(f"unknown approaches {sorted(unknown)}")
        if any(not v >= 0 for v in self.noise_variances):
            raise ConfigError("noise variances must be >= 0")
        if self.noise_units not in NOISE_UNITS:
            raise ConfigError(f"noise_units must be one of {NOISE_UNITS}")
        if not self.svd_memory_gib > 0:
            raise ConfigError("svd_memory_gib must be > 0")
        if self.mc_repeats < 1:
            raise ConfigError("mc_repeats must be >= 1")
        self.manifest  # validates split/count/generator

    @property
    def manifest(self) -> DatasetManifest:
        params = GeneratorParams.from_dict({**self.generator,
                                            "image_size": self.geometry.image_size})
        return DatasetManifest(seed=self.seed, count=self.count, split=tuple(self.split),
                               generator_params=params)

    def effective_variance(self, variance: float) -> float:
        if self.noise_units == "pixel":
            return variance / self.geometry.image_size**2
        return variance

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, (Geometry, TrainConfig)):
                value = value.to_dict()
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        known = {f.name for f in fields(cls)}
        extra = set(raw) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        try:
            if "geometry" in raw:
                raw["geometry"] = Geometry(**raw["geometry"])
            for key in ("spectral_train", "fourier_train"):
                if key in raw:
                    raw[key] = replace(cls.__dataclass_fields__[key].default, **raw[key])
            for key in ("split", "noise_variances", "approaches", "sweep_variances"):
                if key in raw:
                    raw[key] = tuple(raw[key])
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        return cls(**raw)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        seed = int(seed)
        return replace(self, seed=seed,
                       spectral_train=replace(self.spectral_train, seed=seed),
                       fourier_train=replace(self.fourier_train, seed=seed))


class Setup:
    """Dataset, operator, SVD and clean sinograms for one configuration, built lazily."""

    def __init__(self, cfg: ExperimentConfig, need_svd: bool = True):
        self.cfg = cfg
        self.geometry = cfg.geometry
        self.dataset = generate_dataset(cfg.manifest)
        self.op = build_operator(cfg.geometry)
        self.svd = compute_svd(self.op, cfg.svd_truncation,
                               int(cfg.svd_memory_gib * 2**30)) if need_svd else None
        self._clean = {}

    def images(self, split):
        return self.dataset.split(split)

    def clean(self, split):
        if split not in self._clean:
            self._clean[split] = forward(self.op, self.images(split))
        return self._clean[split]

    def noise(self, split, variance, repeat=0):
        """Noise for ``split`` at nominal ``variance``; ``repeat`` selects independent draws."""
        spec = NoiseSpec(self.cfg.effective_variance(variance), self.cfg.seed)
        idx = self.dataset.indices(split) + repeat * self.cfg.count
        return sample_noise_batch(spec, self.geometry, idx)

    def noisy(self, split, variance, repeat=0):
        return self.clean(split) + self.noise(split, variance, repeat)


# --------------------------------------------------------------------------
# output helpers


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return value
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x
                        for x in row])


def _label(variance) -> str:
    return f"{variance:g}"


def _write_trace(path, trace):
    write_csv(path, ["epoch", "train_loss", "val_loss"], trace)


# --------------------------------------------------------------------------
# four-approach comparison


def _pseudo_ramp(setup: Setup, out: Path | None):
    """Filter trained on clean data; frozen and reused at every noise level."""
    cfg = setup.cfg
    filt, trace = train_fourier(setup.op, setup.images("train"), setup.clean("train"),
                                cfg.fourier_train, cfg.fft_angle_constant,
                                val=(setup.images("val"), setup.clean("val")),
                                provenance="pseudo_ramp")
    if out is not None:
        filt.export_csv(out / "filter_pseudo_ramp.csv")
        _write_trace(out / "loss_trace_pseudo_ramp.csv", trace)
    return filt, trace


def _loss_to_mse(loss, geometry):
    return loss / geometry.num_pixels


def run_comparison(cfg: ExperimentConfig, out_dir=None, setup: Setup | None = None) -> dict:
    """Fit every requested approach at every noise level and score it on the test split.

    Returns the results table (also written to ``results.json``).  MSE is the
    mean over test images of the per-image pixel MSE; PSNR is computed from
    that mean (peak 1); SSIM is the mean per-image SSIM.
    """
    if cfg.geometry.image_size < metrics.SSIM_WINDOW:
        raise ConfigError(f"comparisons report SSIM, which needs image_size >= "
                          f"{metrics.SSIM_WINDOW}")
    started = time.perf_counter()
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    needs_svd = any(a.startswith("svd") for a in cfg.approaches)
    setup = setup or Setup(cfg, need_svd=needs_svd)
    geo = setup.geometry
    train_u, val_u, test_u = (setup.images(s) for s in ("train", "val", "test"))

    pseudo_ramp = None
    if "fft_analytic" in cfg.approaches:
        pseudo_ramp, _ = _pseudo_ramp(setup, out)

    results = {a: {} for a in cfg.approaches}
    family_optimum = {}
    for variance in cfg.noise_variances:
        key = _label(variance)
        eff = cfg.effective_variance(variance)
        f_train = setup.noisy("train", variance)
        f_val = setup.noisy("val", variance)
        f_test = setup.noisy("test", variance)
        noise_train = f_train - setup.clean("train")
        recon = {}
        train_mse = {}
        family_optimum[key] = {}

        if needs_svd:
            svd = setup.svd
            problem = SpectralProblem(svd, train_u, f_train)
            stats = compute_spectral_stats(svd, train_u, noise_train, eff)
            g_analytic = optimal_coefficients_empirical(svd.sigma, stats)
            family_optimum[key]["svd"] = _loss_to_mse(problem.loss(g_analytic.g), geo)
            if out is not None:
                export_coefficients_csv(out / f"coefficients_svd_analytic_s2_{key}.csv",
                                        svd.sigma, stats, g_analytic,
                                        _tikhonov_reference(svd.sigma, stats))
            if "svd_analytic" in cfg.approaches:
                recon["svd_analytic"] = reconstruct_spectral(setup.op, svd, g_analytic, f_test)
                train_mse["svd_analytic"] = family_optimum[key]["svd"]
            if "svd_learned" in cfg.approaches:
                g_learned, trace = train_spectral(svd, train_u, f_train, cfg.spectral_train,
                                                  val=(val_u, f_val), noise_variance=eff)
                recon["svd_learned"] = reconstruct_spectral(setup.op, svd, g_learned, f_test)
                train_mse["svd_learned"] = _loss_to_mse(problem.loss(g_learned.g), geo)
                if out is not None:
                    _write_trace(out / f"loss_trace_svd_learned_s2_{key}.csv", trace)
                    export_coefficients_csv(out / f"coefficients_svd_learned_s2_{key}.csv",
                                            svd.sigma, stats, g_learned)

        if any(a.startswith("fft") for a in cfg.approaches):
            full_problem = FourierProblem(setup.op, train_u, f_train, angle_constant=False)
            _, opt_loss = fourier_least_squares(full_problem)
            family_optimum[key]["fft"] = _loss_to_mse(opt_loss, geo)
            if "fft_learned" in cfg.approaches:
                if variance == 0 and pseudo_ramp is not None:
                    learned = replace(pseudo_ramp, provenance="learned")
                else:
                    learned, trace = train_fourier(setup.op, train_u, f_train, cfg.fourier_train,
                                                   cfg.fft_angle_constant, val=(val_u, f_val))
                    if out is not None:
                        _write_trace(out / f"loss_trace_fft_learned_s2_{key}.csv", trace)
                recon["fft_learned"] = fbp_reconstruct(setup.op, learned, f_test)
                train_mse["fft_learned"] = _loss_to_mse(full_problem.loss(learned.rho), geo)
                if out is not None:
                    learned.export_csv(out / f"filter_fft_learned_s2_{key}.csv")
            if "fft_analytic" in cfg.approaches:
                fstats = compute_fourier_stats(setup.clean("train"), noise_train)
                analytic = analytic_filter_empirical(fstats, geo, base=pseudo_ramp.rho)
                recon["fft_analytic"] = fbp_reconstruct(setup.op, analytic, f_test)
                train_mse["fft_analytic"] = _loss_to_mse(full_problem.loss(analytic.rho), geo)
                if out is not None:
                    analytic.export_csv(out / f"filter_fft_analytic_s2_{key}.csv")

        for approach in cfg.approaches:
            scores = metrics.evaluate(test_u, recon[approach])
            per_image = scores.pop("per_image_mse")
            scores["train_mse"] = train_mse[approach]
            results[approach][key] = scores
            recon[approach] = per_image  # keep per-image errors for paired comparisons
        results_pairs = _paired_differences(recon)
        for approach in cfg.approaches:
            results[approach][key]["paired_stderr_vs"] = results_pairs.get(approach, {})

    table = {
        "geometry": geo.to_dict(),
        "manifest": cfg.manifest.to_dict(),
        "config": cfg.to_dict(),
        "n_train": len(train_u), "n_val": len(val_u), "n_test": len(test_u),
        "results": results,
        "family_optimum_train_mse": family_optimum,
        "conventions": {
            "mse": "mean over test images of per-image pixel MSE",
            "psnr": "10 log10(1 / mean MSE), dB",
            "ssim": "mean per-image SSIM, 11x11 Gaussian window sigma 1.5, K1=0.01, K2=0.03, range 1",
            "noise_units": cfg.noise_units,
            "sinogram_axes": "rows = angles (K), columns = positions (L)",
        },
    }
    if out is not None:
        write_json(out / "results.json", table)
        write_json(out / "timing.json", {"wall_seconds": time.perf_counter() - started})
    return table


def _paired_differences(per_image: dict) -> dict:
    """Standard error of the mean per-image MSE difference for every approach pair."""
    out = {}
    names = list(per_image)
    for a in names:
        out[a] = {}
        for b in names:
            if a == b:
                continue
            diff = per_image[a] - per_image[b]
            out[a][b] = float(np.std(diff, ddof=1) / np.sqrt(len(diff))) if len(diff) > 1 else 0.0
    return out


def _tikhonov_reference(sigma, stats):
    """Tikhonov coefficients with ``alpha = max Delta / mean Pi`` (white-noise, flat-prior analogue)."""
    mean_pi = float(np.mean(stats.Pi))
    alpha = float(np.max(stats.Delta)) / mean_pi if mean_pi > 0 else 0.0
    return sigma / (sigma**2 + alpha)


# --------------------------------------------------------------------------
# noise sweep


def run_noise_sweep(cfg: ExperimentConfig, variances=None, out_dir=None,
                    setup: Setup | None = None) -> dict:
    """Closed-form optimal expected error against a Monte-Carlo test estimate.

    For each white-noise variance ``delta^2`` the population-optimal
    coefficients are built from ``Pi`` estimated on the training images and
    ``Delta_n = delta^2``.  The closed form is ``sum Delta Pi / (sigma^2 Pi + Delta)``;
    the Monte-Carlo value is the mean squared reconstruction error on the
    test split with fresh noise (``cfg.mc_repeats`` draws per image).
    """
    variances = list(cfg.sweep_variances if variances is None else variances)
    positive = [v for v in variances if v != 0]
    if any(v < 0 for v in variances) or any(b >= a for a, b in zip(positive, positive[1:])):
        raise ConfigError("sweep variances must be positive and strictly decreasing "
                          "(optionally followed by 0)")
    if 0 in variances and variances[-1] != 0:
        raise ConfigError("the zero endpoint must come last")
    setup = setup or Setup(cfg)
    svd = setup.svd
    geo = setup.geometry
    pi = np.mean(svd.image_coefficients(setup.images("train")) ** 2, axis=0)
    test_u = setup.images("test")
    rows = []
    for variance in variances:
        eff = cfg.effective_variance(variance)
        delta = np.full_like(pi, eff)
        g = optimal_coefficients_population(svd.sigma, pi, delta, eff)
        closed = expected_error(svd.sigma, pi, delta)
        errors = []
        for rep in range(cfg.mc_repeats):
            rec = reconstruct_spectral(setup.op, svd, g, setup.noisy("test", variance, rep))
            errors.append(np.sum((rec - test_u).reshape(len(test_u), -1) ** 2, axis=1))
        errors = np.concatenate(errors)
        mc = float(np.mean(errors))
        se = float(np.std(errors, ddof=1) / np.sqrt(errors.size))
        # at zero noise both sides are ~0 and the standard error is rounding noise
        z = (mc - closed) / se if variance > 0 and se > 0 else math.nan
        rows.append({"variance": variance, "delta2": eff, "closed_form": closed,
                     "monte_carlo": mc, "monte_carlo_stderr": se, "z_score": z,
                     "closed_form_mse": closed / geo.num_pixels,
                     "monte_carlo_mse": mc / geo.num_pixels})
    closed_values = [r["closed_form"] for r in rows]
    summary = {
        "rows": rows,
        "closed_form_strictly_decreasing": all(b < a for a, b in zip(closed_values, closed_values[1:])),
        "max_abs_z": max((abs(r["z_score"]) for r in rows if r["variance"] > 0), default=0.0),
        "zero_noise_error_mse": next((r["monte_carlo_mse"] for r in rows if r["variance"] == 0),
                                     None),
        "geometry": geo.to_dict(), "n_train": len(setup.images("train")),
        "n_test": len(test_u), "mc_repeats": cfg.mc_repeats,
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        keys = list(rows[0])
        write_csv(out / "sweep.csv", keys, [[r[k] for k in keys] for r in rows])
        write_json(out / "sweep.json", summary)
    return summary


# --------------------------------------------------------------------------
# oversmoothing


def run_oversmoothing_report(cfg: ExperimentConfig, variance=None, out_dir=None,
                             setup: Setup | None = None) -> dict:
    """Per-mode smoothness of optimal reconstructions versus the training images.

    Uses empirical ``Pi_n`` and ``Delta_n`` on the training split.  The tail
    bound ``Pi~_n / Pi_n <= sigma_n^2 / (c delta^2)`` is checked on the last
    third of the modes with ``c = min Delta_n / (delta^2 Pi_n)`` over that tail.
    """
    variance = cfg.oversmoothing_variance if variance is None else variance
    setup = setup or Setup(cfg)
    svd = setup.svd
    eff = cfg.effective_variance(variance)
    stats = compute_spectral_stats(svd, setup.images("train"), setup.noise("train", variance), eff)
    sigma, pi, delta = svd.sigma, stats.Pi, stats.Delta
    smooth = expected_smoothness(sigma, pi, delta)
    ratio = np.zeros_like(pi)
    np.divide(smooth, pi, out=ratio, where=pi > 0)
    weights = range_condition_weights(sigma, pi, delta)
    delta2 = noise_level(NoiseSpec(eff, cfg.seed), stats)
    n0 = (2 * len(sigma)) // 3
    tail = slice(n0, None)
    if delta2 > 0:
        c = float(np.min(delta[tail] / (delta2 * pi[tail])))
        bound = sigma[tail] ** 2 / (c * delta2)
        tail_ok = bool(np.all(ratio[tail] <= bound * (1 + 1e-12)))
    else:
        c, bound, tail_ok = math.inf, np.zeros(len(sigma) - n0), True
    in_unit = bool(np.all((ratio >= 0) & (ratio <= 1)))
    summary = {"variance": variance, "delta2": delta2, "n0": n0 + 1, "c": c,
               "ratios_in_unit_interval": in_unit, "tail_bound_holds": tail_ok,
               "mean_ratio_leading_10": float(np.mean(ratio[:10]))}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        tail_bound = np.full(len(sigma), np.nan)
        tail_bound[tail] = bound
        write_csv(out / "oversmoothing.csv",
                  ["n", "sigma_n", "Pi_n", "Pi_tilde_n", "ratio", "range_condition_weight",
                   "tail_bound"],
                  [[n + 1, sigma[n], pi[n], smooth[n], ratio[n], weights[n], tail_bound[n]]
                   for n in range(len(sigma))])
        write_json(out / "oversmoothing.json", summary)
    summary["ratio"] = ratio
    summary["tail_bound"] = bound
    return summary


# --------------------------------------------------------------------------
# resolution transfer


def transfer_coefficients(sigma_hat_src, g_hat_src, sigma_hat_tgt):
    """Piecewise-linear ``g(sigma)`` through the source nodes, constant beyond them.

    Returns ``(g_hat_tgt, extrapolated_mask)``.
    """
    sigma_hat_src = np.asarray(sigma_hat_src, float)
    sigma_hat_tgt = np.asarray(sigma_hat_tgt, float)
    if sigma_hat_src.shape == sigma_hat_tgt.shape and np.array_equal(sigma_hat_src, sigma_hat_tgt):
        return np.array(g_hat_src, dtype=float), np.zeros(sigma_hat_tgt.shape, bool)
    order = np.argsort(sigma_hat_src, kind="stable")
    xs, ys = sigma_hat_src[order], np.asarray(g_hat_src, float)[order]
    values = np.interp(sigma_hat_tgt, xs, ys)
    extrapolated = (sigma_hat_tgt < xs[0]) | (sigma_hat_tgt > xs[-1])
    return values, extrapolated


def transfer_filter(filt: FourierFilter, target: Geometry):
    """Bilinear interpolation of ``rho(theta, |r|)`` onto another geometry.

    Angles are treated as periodic with period pi; frequencies beyond the
    source range take the boundary value and are flagged.
    """
    src = filt.geometry
    r_src = frequencies(src)
    half = r_src >= 0
    r_half = r_src[half]
    order = np.argsort(r_half)
    r_half = r_half[order]
    rho_half = filt.rho[:, half][:, order]
    theta = src.angles
    theta_ext = np.concatenate([[theta[-1] - np.pi], theta, [theta[0] + np.pi]])
    rho_ext = np.concatenate([rho_half[-1:], rho_half, rho_half[:1]], axis=0)
    interp = RegularGridInterpolator((theta_ext, r_half), rho_ext, method="linear")
    r_tgt = np.abs(frequencies(target))
    extrapolated = r_tgt > r_half[-1]
    r_clip = np.minimum(r_tgt, r_half[-1])
    tt, rr = np.meshgrid(target.angles, r_clip, indexing="ij")
    rho = interp(np.stack([tt.ravel(), rr.ravel()], axis=1)).reshape(target.sinogram_shape)
    if src == target:
        rho = filt.rho.copy()
        extrapolated = np.zeros_like(extrapolated)
    return FourierFilter(target, rho, "transferred"), extrapolated


def run_resolution_transfer(cfg_low: ExperimentConfig, cfg_high: ExperimentConfig,
                            variance: float = 0.005, out_dir=None, include_fft: bool = True,
                            leading_modes: int = 10) -> dict:
    """Fit at the low resolution, rescale, and evaluate at the high resolution.

    Spectral coefficients are compared as ``g_hat = g / sigma_factor`` over
    ``sigma_hat = sigma * sigma_factor``; filters are compared directly in
    physical frequency units.  Losses are training-set mean squared errors
    at the target resolution.
    """
    setups = {"low": Setup(cfg_low), "high": Setup(cfg_high)}
    native = {}
    for name, setup in setups.items():
        cfg = setup.cfg
        eff = cfg.effective_variance(variance)
        noise = setup.noise("train", variance)
        stats = compute_spectral_stats(setup.svd, setup.images("train"), noise, eff)
        g = optimal_coefficients_empirical(setup.svd.sigma, stats).g
        factor = continuous_scaling(setup.geometry).sigma_factor
        native[name] = {"sigma_hat": setup.svd.sigma * factor, "g_hat": g / factor,
                        "g": g, "factor": factor, "stats": stats}

    low, high = native["low"], native["high"]
    g_hat_tr, extrap = transfer_coefficients(low["sigma_hat"], low["g_hat"], high["sigma_hat"])
    g_tr = g_hat_tr * high["factor"]
    hs = setups["high"]
    problem = SpectralProblem(hs.svd, hs.images("train"), hs.noisy("train", variance))
    loss_native = problem.loss(high["g"]) / hs.geometry.num_pixels
    loss_transfer = problem.loss(g_tr) / hs.geometry.num_pixels

    k = min(leading_modes, len(low["sigma_hat"]), len(high["sigma_hat"]))
    sigma_rel = np.abs(high["sigma_hat"][:k] / low["sigma_hat"][:k] - 1)
    # curve agreement: transferred vs native g_hat, leading (large sigma) modes and the
    # low-sigma end of the overlapping range
    lead_rel = np.abs(g_hat_tr[:k] - high["g_hat"][:k]) / np.abs(high["g_hat"][:k])
    overlap = ~extrap
    low_region = overlap & (high["sigma_hat"] <= np.quantile(high["sigma_hat"][overlap], 0.25))
    peak = float(np.max(np.abs(high["g_hat"])))
    low_sigma_dev = float(np.max(np.abs(g_hat_tr[low_region] - high["g_hat"][low_region]))) / peak

    report = {
        "variance": variance,
        "geometries": {"low": setups["low"].geometry.to_dict(),
                       "high": hs.geometry.to_dict()},
        "svd": {
            "loss_native": loss_native, "loss_transferred": loss_transfer,
            "transferred_not_better": bool(loss_transfer >= loss_native * (1 - 1e-12)),
            "leading_sigma_hat_max_rel_diff": float(sigma_rel.max()) if k else 0.0,
            "leading_g_hat_max_rel_diff": float(lead_rel.max()) if k else 0.0,
            "low_sigma_g_hat_max_dev_rel_peak": low_sigma_dev,
            "extrapolated_modes": int(extrap.sum()),
        },
    }
    if include_fft:
        fits = {}
        for name, setup in setups.items():
            prob = FourierProblem(setup.op, setup.images("train"),
                                  setup.noisy("train", variance), cfg_low.fft_angle_constant)
            params, loss = fourier_least_squares(prob)
            rho = np.broadcast_to(params, setup.geometry.sinogram_shape).copy()
            fits[name] = (FourierFilter(setup.geometry, rho, "learned",
                                        angle_constant=cfg_low.fft_angle_constant), loss, prob)
        moved, f_extrap = transfer_filter(fits["low"][0], hs.geometry)
        prob_high = fits["high"][2]
        params_tr = moved.rho[0] if prob_high.angle_constant else moved.rho
        report["fft"] = {
            "loss_native": fits["high"][1] / hs.geometry.num_pixels,
            "loss_transferred": prob_high.loss(params_tr) / hs.geometry.num_pixels,
            "extrapolated_frequency_bins": int(f_extrap.sum()),
        }
        report["fft"]["transferred_not_better"] = bool(
            report["fft"]["loss_transferred"] >= report["fft"]["loss_native"] * (1 - 1e-9))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "transfer.json", report)
        write_csv(out / "transfer_svd_low.csv", ["n", "sigma_hat", "g_hat"],
                  [[n + 1, s, g] for n, (s, g) in enumerate(zip(low["sigma_hat"], low["g_hat"]))])
        write_csv(out / "transfer_svd_high.csv",
                  ["n", "sigma_hat", "g_hat_native", "g_hat_transferred", "extrapolated"],
                  [[n + 1, s, g, t, int(e)] for n, (s, g, t, e) in
                   enumerate(zip(high["sigma_hat"], high["g_hat"], g_hat_tr, extrap))])
        if include_fft:
            fits["low"][0].export_csv(out / "transfer_filter_low.csv")
            fits["high"][0].export_csv(out / "transfer_filter_high.csv")
            moved.export_csv(out / "transfer_filter_transferred.csv")
    report["_curves"] = {"low": low, "high": high, "g_hat_transferred": g_hat_tr,
                         "extrapolated": extrap}
    return report


def load_config(path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return ExperimentConfig.from_dict(raw)


def default_config(**overrides) -> ExperimentConfig:
    return replace(ExperimentConfig(), **overrides)


def deepcopy_config(cfg: ExperimentConfig) -> ExperimentConfig:
    return copy.deepcopy(cfg)

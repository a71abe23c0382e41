"""Random-ellipse phantoms, dataset splits and on-disk persistence."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ._streams import PHANTOM_DOMAIN, stream
from .errors import ConfigError, FormatError

SPLITS = ("train", "val", "test")
_MAX_REJECTIONS = 10_000


@dataclass(frozen=True)
class EllipseSpec:
    """An ellipse in unit-square coordinates ``(x, y)``; ``rotation`` in radians."""

    center: tuple[float, float]
    semi_axes: tuple[float, float]
    rotation: float
    intensity: float

    def half_extents(self) -> tuple[float, float]:
        a, b = self.semi_axes
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        return math.hypot(a * c, b * s), math.hypot(a * s, b * c)

    def contained(self) -> bool:
        wx, wy = self.half_extents()
        x, y = self.center
        return wx <= x <= 1 - wx and wy <= y <= 1 - wy


@dataclass(frozen=True)
class GeneratorParams:
    """Sampling ranges for the ellipse generator (all bounds inclusive).

    Each image draws a count in ``n_ellipses``, one ring radius around
    ``(0.5, 0.5)`` and, per ellipse, a uniform angle on that ring, two
    semi-axes, a rotation and an intensity.
    """

    image_size: int = 32
    n_ellipses: tuple[int, int] = (3, 8)
    ring_radius: tuple[float, float] = (0.15, 0.35)
    semi_axis: tuple[float, float] = (0.05, 0.20)
    rotation: tuple[float, float] = (0.0, math.pi)
    intensity: tuple[float, float] = (0.2, 1.0)

    def __post_init__(self):
        if self.image_size < 4:
            raise ConfigError(f"image_size must be >= 4, got {self.image_size}")
        for name in ("n_ellipses", "ring_radius", "semi_axis", "rotation", "intensity"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ConfigError(f"empty sampling range {name}=({lo}, {hi})")
        if self.n_ellipses[0] < 0:
            raise ConfigError("n_ellipses must be non-negative")
        if self.semi_axis[0] <= 0:
            raise ConfigError("semi-axes must be positive")
        if not (0 < self.intensity[0] and self.intensity[1] <= 1):
            raise ConfigError("intensities must lie in (0, 1]")

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorParams":
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


def sample_ellipses(seed: int, index: int, params: GeneratorParams) -> list[EllipseSpec]:
    gen = stream(seed, index, PHANTOM_DOMAIN)
    lo, hi = params.n_ellipses
    count = int(gen.integers(lo, hi, endpoint=True))
    radius = gen.uniform(*params.ring_radius)
    ellipses = []
    for _ in range(count):
        for _attempt in range(_MAX_REJECTIONS):
            angle = gen.uniform(0.0, 2 * math.pi)
            a = gen.uniform(*params.semi_axis)
            b = gen.uniform(*params.semi_axis)
            rot = gen.uniform(*params.rotation)
            value = gen.uniform(*params.intensity)
            e = EllipseSpec((0.5 + radius * math.cos(angle), 0.5 + radius * math.sin(angle)),
                            (a, b), rot, value)
            if e.contained():
                ellipses.append(e)
                break
        else:
            raise ConfigError("could not place an ellipse inside the unit square; "
                              "ring_radius + semi_axis ranges are too large")
    return ellipses


def rasterize(ellipses, size: int) -> np.ndarray:
    """Sum of intensities of ellipses covering each pixel centre, clamped to [0, 1].

    Row ``i`` has ``y = (i + 1/2) / size``; column ``j`` has ``x = (j + 1/2) / size``.
    """
    coords = (np.arange(size) + 0.5) / size
    x, y = np.meshgrid(coords, coords)
    img = np.zeros((size, size))
    for e in ellipses:
        dx, dy = x - e.center[0], y - e.center[1]
        c, s = math.cos(e.rotation), math.sin(e.rotation)
        p = (dx * c + dy * s) / e.semi_axes[0]
        q = (-dx * s + dy * c) / e.semi_axes[1]
        img[p * p + q * q <= 1.0] += e.intensity
    return np.clip(img, 0.0, 1.0)


def generate_phantom(seed: int, params: GeneratorParams, index: int = 0) -> np.ndarray:
    """One ``I x I`` phantom, fully determined by ``(seed, index, params)``."""
    return rasterize(sample_ellipses(seed, index, params), params.image_size)


@dataclass(frozen=True)
class DatasetManifest:
    seed: int = 0
    count: int = 2000
    split: tuple[float, float, float] = (0.64, 0.16, 0.20)
    generator_params: GeneratorParams = field(default_factory=GeneratorParams)

    def __post_init__(self):
        if self.count < 1:
            raise ConfigError("count must be >= 1")
        if len(self.split) != 3 or min(self.split) < 0:
            raise ConfigError(f"split must be three non-negative fractions, got {self.split}")
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions sum to {sum(self.split)}, expected 1")

    @property
    def image_size(self) -> int:
        return self.generator_params.image_size

    def split_sizes(self) -> tuple[int, int, int]:
        """Validation and test sizes are ``floor(fraction * count + 1/2)``; train gets the rest."""
        n_val = math.floor(self.split[1] * self.count + 0.5)
        n_test = math.floor(self.split[2] * self.count + 0.5)
        n_val = min(n_val, self.count)
        n_test = min(n_test, self.count - n_val)
        return self.count - n_val - n_test, n_val, n_test

    def to_dict(self) -> dict:
        return {"seed": self.seed, "count": self.count, "split": list(self.split),
                "image_size": self.image_size,
                "split_sizes": list(self.split_sizes()),
                "split_rule": "val,test = floor(fraction*count + 0.5); train = remainder; "
                              "indices contiguous in order train, val, test",
                "generator_params": self.generator_params.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        params = GeneratorParams.from_dict(d["generator_params"])
        if "image_size" in d and d["image_size"] != params.image_size:
            raise FormatError("manifest image_size disagrees with generator_params",
                              field="image_size")
        return cls(seed=int(d["seed"]), count=int(d["count"]), split=tuple(d["split"]),
                   generator_params=params)


@dataclass
class Dataset:
    """Ordered images ``(count, I, I)`` plus contiguous split index ranges."""

    manifest: DatasetManifest
    images: np.ndarray

    def indices(self, split: str) -> np.ndarray:
        n_train, n_val, _ = self.manifest.split_sizes()
        bounds = {"train": (0, n_train), "val": (n_train, n_train + n_val),
                  "test": (n_train + n_val, self.manifest.count)}
        lo, hi = bounds[split]
        return np.arange(lo, hi)

    def split(self, name: str) -> np.ndarray:
        return self.images[self.indices(name)]


def generate_dataset(manifest: DatasetManifest) -> Dataset:
    params = manifest.generator_params
    images = np.stack([generate_phantom(manifest.seed, params, i) for i in range(manifest.count)])
    return Dataset(manifest, images)


def save_dataset(dataset: Dataset, path) -> None:
    """Write ``manifest.json`` and little-endian float64 blobs ``{train,val,test}.f64``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    (path / "manifest.json").write_text(json.dumps(dataset.manifest.to_dict(), indent=2))
    for name in SPLITS:
        dataset.split(name).astype("<f8").tofile(path / f"{name}.f64")


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        raw = json.loads((path / "manifest.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read manifest: {exc}", field="manifest") from exc
    for key in ("seed", "count", "split", "generator_params"):
        if key not in raw:
            raise FormatError(f"manifest missing field {key!r}", field=key)
    return DatasetManifest.from_dict(raw)


def load_dataset(path) -> Dataset:
    path = Path(path)
    manifest = load_manifest(path)
    n = manifest.image_size
    parts = []
    for name, size in zip(SPLITS, manifest.split_sizes()):
        blob = path / f"{name}.f64"
        data = np.fromfile(blob, dtype="<f8")
        if data.size != size * n * n:
            raise FormatError(f"{blob.name} holds {data.size} values, manifest declares "
                              f"{size} images of {n}x{n}", field="image_size")
        parts.append(data.reshape(size, n, n))
    return Dataset(manifest, np.concatenate(parts).astype(float))

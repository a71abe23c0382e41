"""Discrete parallel-beam Radon transform with a piecewise-constant pixel model.

The image lives on the unit square, centred at the origin for geometry
purposes, with ``I x I`` pixels of width ``1/I``.  Pixel ``(i, j)`` (row,
column) covers ``[i/I - 1/2, (i+1)/I - 1/2) x [j/I - 1/2, (j+1)/I - 1/2)`` in
(row-axis, column-axis) coordinates; row 0 is the lowest row.  A ray with
angle ``theta`` and offset ``s`` is the line ``{p : p . (cos theta, sin theta) = s}``
with ``p`` in those coordinates, so ``theta = 0`` rays run along image rows.

Matrix entries are exact intersection lengths of the ray with each pixel
square, obtained by parametric (Liang-Barsky) clipping.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from .errors import ConfigError, DimensionError

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class Geometry:
    """Parallel-beam acquisition geometry on the unit square.

    ``num_angles`` (K) angles ``theta_k = k pi / K`` and ``num_positions`` (L)
    detector offsets ``s_l = -sqrt(2)/2 + (l + 1/2) sqrt(2)/L``.
    """

    image_size: int
    num_angles: int
    num_positions: int

    def __post_init__(self):
        for name in ("image_size", "num_angles", "num_positions"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")

    @property
    def pixel_width(self) -> float:
        return 1.0 / self.image_size

    @property
    def position_spacing(self) -> float:
        return _SQRT2 / self.num_positions

    @property
    def angles(self) -> np.ndarray:
        return np.arange(self.num_angles) * (np.pi / self.num_angles)

    @property
    def positions(self) -> np.ndarray:
        return -_SQRT2 / 2 + (np.arange(self.num_positions) + 0.5) * self.position_spacing

    @property
    def image_shape(self) -> tuple[int, int]:
        return (self.image_size, self.image_size)

    @property
    def sinogram_shape(self) -> tuple[int, int]:
        return (self.num_angles, self.num_positions)

    @property
    def num_pixels(self) -> int:
        return self.image_size**2

    @property
    def num_rays(self) -> int:
        return self.num_angles * self.num_positions

    def scaled(self, factor: int) -> "Geometry":
        return Geometry(self.image_size * factor, self.num_angles * factor,
                        self.num_positions * factor)

    def to_dict(self) -> dict:
        return asdict(self)


def _direction(theta):
    # snap cos/sin of exact multiples of pi/2 so axis-parallel rays stay parallel
    c, s = math.cos(theta), math.sin(theta)
    if abs(c) < 1e-15:
        c = 0.0
    if abs(s) < 1e-15:
        s = 0.0
    return c, s


def _axis_interval(offset, slope, lo, hi):
    """Parameter interval where ``lo <= offset + t * slope < hi``."""
    if slope == 0.0:
        inside = (offset >= lo) & (offset < hi)
        big = np.where(inside, np.inf, -np.inf)
        return -big, big
    t0 = (lo - offset) / slope
    t1 = (hi - offset) / slope
    return np.minimum(t0, t1), np.maximum(t0, t1)


def ray_row(image_size: int, theta: float, s) -> np.ndarray:
    """Intersection lengths of the ray(s) ``(theta, s)`` with every pixel.

    Returns shape ``(len(s), image_size**2)`` (or ``(image_size**2,)`` for
    scalar ``s``), pixels in row-major order.
    """
    scalar = np.ndim(s) == 0
    s = np.atleast_1d(np.asarray(s, dtype=float))[:, None]
    n = image_size
    edges = np.arange(n + 1) / n - 0.5
    c, sn = _direction(theta)
    # point on the ray: p(t) = s * (c, sn) + t * (-sn, c)
    r_lo, r_hi = _axis_interval(s * c, -sn, edges[None, :-1], edges[None, 1:])
    q_lo, q_hi = _axis_interval(s * sn, c, edges[None, :-1], edges[None, 1:])
    # (rays, rows, cols)
    t_lo = np.maximum(r_lo[:, :, None], q_lo[:, None, :])
    t_hi = np.minimum(r_hi[:, :, None], q_hi[:, None, :])
    length = np.clip(t_hi - t_lo, 0.0, None)
    length[~np.isfinite(length)] = 0.0
    out = length.reshape(len(s), n * n)
    return out[0] if scalar else out


class RadonMatrix:
    """Sparse ray-by-pixel system matrix for a :class:`Geometry`.

    Rows are ordered angle-major (``k * L + l``); columns follow row-major
    pixel order.  Instances are treated as immutable.
    """

    def __init__(self, geometry: Geometry, matrix: sparse.csr_matrix):
        self.geometry = geometry
        self.matrix = matrix.tocsr()
        self._matrix_t = self.matrix.T.tocsr()

    @property
    def shape(self):
        return self.matrix.shape

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def norm_estimate(self) -> float:
        """Largest singular value, via a few power iterations on A^T A."""
        from scipy.sparse.linalg import svds

        return float(svds(self.matrix, k=1, return_singular_vectors=False,
                          random_state=0)[0])

    def dump(self, path) -> None:
        """Write ``geometry.json`` and ``triplets.csv`` (row, col, value) to ``path``."""
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        coo = self.matrix.tocoo()
        header = {"geometry": self.geometry.to_dict(), "nnz": int(coo.nnz),
                  "shape": list(coo.shape), "row_order": "angle_major",
                  "column_order": "row_major"}
        (path / "geometry.json").write_text(json.dumps(header, indent=2, sort_keys=True))
        order = np.lexsort((coo.col, coo.row))
        with open(path / "triplets.csv", "w") as fh:
            fh.write("row,col,value\n")
            for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
                fh.write(f"{r},{c},{float(v)!r}\n")


def build_operator(geometry: Geometry) -> RadonMatrix:
    """Assemble the exact intersection-length matrix, one angle at a time."""
    n_pix = geometry.num_pixels
    positions = geometry.positions
    blocks = []
    for theta in geometry.angles:
        block = ray_row(geometry.image_size, theta, positions)
        blocks.append(sparse.csr_matrix(block))
    matrix = sparse.vstack(blocks, format="csr")
    matrix.eliminate_zeros()
    assert matrix.shape == (geometry.num_rays, n_pix)
    return RadonMatrix(geometry, matrix)


def _check_image(op, u):
    u = np.asarray(u, dtype=float)
    n = op.geometry.num_pixels
    if u.shape[-2:] == op.geometry.image_shape:
        return u.reshape(u.shape[:-2] + (n,)), u.shape[:-2]
    if u.shape[-1:] == (n,):
        return u, u.shape[:-1]
    raise DimensionError(f"image shape {u.shape} does not match geometry {op.geometry}")


def _check_sinogram(op, f):
    f = np.asarray(f, dtype=float)
    m = op.geometry.num_rays
    if f.shape[-2:] == op.geometry.sinogram_shape:
        return f.reshape(f.shape[:-2] + (m,)), f.shape[:-2]
    if f.shape[-1:] == (m,):
        return f, f.shape[:-1]
    raise DimensionError(f"sinogram shape {f.shape} does not match geometry {op.geometry}")


def forward(op: RadonMatrix, u) -> np.ndarray:
    """Sinogram(s) ``A u``; accepts ``(..., I, I)`` or ``(..., I*I)`` input.

    Returns shape ``(..., K, L)``.
    """
    flat, batch = _check_image(op, u)
    out = (op.matrix @ flat.reshape(-1, flat.shape[-1]).T).T
    return out.reshape(batch + op.geometry.sinogram_shape)


def adjoint(op: RadonMatrix, f) -> np.ndarray:
    """Backprojection ``A^T f``; returns images of shape ``(..., I, I)``."""
    flat, batch = _check_sinogram(op, f)
    out = (op._matrix_t @ flat.reshape(-1, flat.shape[-1]).T).T
    return out.reshape(batch + op.geometry.image_shape)


@dataclass(frozen=True)
class ContinuousScaling:
    """Factors relating discrete quantities to their continuous counterparts.

    ``continuous = factor * discrete`` for each entry, except ``u_factor`` and
    ``v_factor`` which map Euclidean-normalized singular vectors to
    L2-normalized functions.
    """

    adjoint_factor: float
    sigma_factor: float
    u_factor: float
    v_factor: float
    Pi_factor: float
    Delta_factor: float
    Gamma_factor: float


def continuous_scaling(geometry: Geometry) -> ContinuousScaling:
    """Scaling factors between the matrix model and the unit-square Radon transform.

    With ``c = sqrt(2) pi / (K L)`` (the data-space quadrature weight) and
    pixel area ``1/I**2``: the continuous adjoint is ``I**2 c A^T``, singular
    values scale by ``I sqrt(c)``, ``Pi`` by ``1/I**2``, ``Delta`` by ``c`` and
    ``Gamma`` by ``sqrt(c)/I``.
    """
    n = geometry.image_size
    c = _SQRT2 * math.pi / (geometry.num_angles * geometry.num_positions)
    return ContinuousScaling(
        adjoint_factor=n * n * c,
        sigma_factor=n * math.sqrt(c),
        u_factor=float(n),
        v_factor=1.0 / math.sqrt(c),
        Pi_factor=1.0 / (n * n),
        Delta_factor=c,
        Gamma_factor=math.sqrt(c) / n,
    )

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from learnedreg.errors import ConfigError, DimensionError
from learnedreg.radon import (Geometry, adjoint, build_operator, continuous_scaling, forward,
                              ray_row)
from oracles import line_integral, smooth_disk_image


def test_geometry_grids():
    g = Geometry(4, 4, 3)
    np.testing.assert_allclose(g.angles, [0, np.pi / 4, np.pi / 2, 3 * np.pi / 4])
    h = math.sqrt(2) / 3
    np.testing.assert_allclose(g.positions, [-math.sqrt(2) / 2 + (l + 0.5) * h for l in range(3)])
    assert g.sinogram_shape == (4, 3)
    assert g.pixel_width == 0.25


@pytest.mark.parametrize("bad", [(0, 1, 1), (1, 0, 1), (1, 1, 0)])
def test_geometry_rejects_nonpositive(bad):
    with pytest.raises(ConfigError):
        Geometry(*bad)


def test_single_pixel_chord():
    op = build_operator(Geometry(1, 1, 1))
    assert op.toarray().tolist() == [[1.0]]


def test_two_by_two_lower_row():
    np.testing.assert_allclose(ray_row(2, 0.0, -0.25), [0.5, 0.5, 0.0, 0.0])


def test_rows_match_line_integration_oracle(rng):
    geo = Geometry(8, 7, 9)
    op = build_operator(geo)
    image = rng.random((8, 8))
    sino = forward(op, image)
    for k, theta in enumerate(geo.angles):
        for l, s in enumerate(geo.positions):
            assert abs(sino[k, l] - line_integral(image, theta, s)) < 1e-3


def test_constant_image_gives_chord_lengths():
    geo = Geometry(16, 6, 15)
    sino = forward(build_operator(geo), np.ones((16, 16)))
    ones = np.ones((16, 16))
    for k, theta in enumerate(geo.angles):
        for l, s in enumerate(geo.positions):
            assert abs(sino[k, l] - line_integral(ones, theta, s)) < 1e-3
    centre = geo.num_positions // 2
    assert abs(sino[0, centre] - 1.0) < 1e-12


def test_entry_bounds(small_op, small_geometry):
    a = small_op.matrix
    assert a.data.min() >= 0
    assert a.data.max() <= math.sqrt(2) / small_geometry.image_size + 1e-12
    assert np.diff(a.indptr).max() <= 2 * small_geometry.image_size


def test_rays_outside_square_give_zero_rows():
    row = ray_row(4, 0.3, [0.72, -0.9])
    assert not row.any()


def test_adjoint_identity(small_op, small_geometry, rng):
    norm = small_op.norm_estimate()
    for _ in range(100):
        u = rng.standard_normal(small_geometry.image_shape)
        v = rng.standard_normal(small_geometry.sinogram_shape)
        lhs = np.sum(forward(small_op, u) * v)
        rhs = np.sum(u * adjoint(small_op, v))
        assert abs(lhs - rhs) <= 1e-10 * np.linalg.norm(u) * np.linalg.norm(v) * norm


def test_single_ray_backprojection(small_op, small_geometry):
    f = np.zeros(small_geometry.sinogram_shape)
    f[3, 5] = 1.0
    back = adjoint(small_op, f).ravel()
    row = small_op.toarray()[3 * small_geometry.num_positions + 5]
    np.testing.assert_array_equal(back, row)
    assert set(np.flatnonzero(back)) == set(np.flatnonzero(row))


def test_zero_inputs(small_op, small_geometry):
    assert not forward(small_op, np.zeros(small_geometry.image_shape)).any()
    assert not adjoint(small_op, np.zeros(small_geometry.sinogram_shape)).any()


def test_forward_accepts_flat_and_batched(small_op, small_geometry, rng):
    u = rng.random((3,) + small_geometry.image_shape)
    a = forward(small_op, u)
    b = forward(small_op, u.reshape(3, -1))
    assert a.shape == (3,) + small_geometry.sinogram_shape
    np.testing.assert_array_equal(a, b)
    with pytest.raises(DimensionError):
        forward(small_op, np.zeros((5, 5)))
    with pytest.raises(DimensionError):
        adjoint(small_op, np.zeros((5, 5)))


@settings(max_examples=30, deadline=None)
@given(alpha=st.floats(-10, 10), beta=st.floats(-10, 10), seed=st.integers(0, 2**31))
def test_forward_linear(small_op, small_geometry, alpha, beta, seed):
    rng = np.random.default_rng(seed)
    u1, u2 = rng.random((2,) + small_geometry.image_shape)
    lhs = forward(small_op, alpha * u1 + beta * u2)
    rhs = alpha * forward(small_op, u1) + beta * forward(small_op, u2)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (1 + abs(alpha) + abs(beta)))


# Declared tolerance at desk geometry.  With about one ray per pixel width the
# exact pixel-model line integrals alias against pixel edges (worst near the
# axis-aligned angles), so rows of even a smooth radial phantom differ by a few
# percent; measured 2.9% for this phantom.
DISK_SYMMETRY_TOL = 0.05


def test_disk_rotational_symmetry():
    geo = Geometry(32, 64, 47)
    sino = forward(build_operator(geo), smooth_disk_image(32))
    mean_row = sino.mean(axis=0)
    deviation = np.linalg.norm(sino - mean_row, axis=1) / np.linalg.norm(mean_row)
    assert deviation.max() <= DISK_SYMMETRY_TOL
    # the same rows agree with the line-integral oracle far more tightly
    image = smooth_disk_image(32)
    for k in (0, 5, 16):
        expect = [line_integral(image, geo.angles[k], s) for s in geo.positions[::6]]
        np.testing.assert_allclose(sino[k, ::6], expect, atol=1e-3)


def test_axis_parallel_rays_exact():
    # theta = pi/2 rays run along columns
    row = ray_row(4, math.pi / 2, 0.1).reshape(4, 4)
    np.testing.assert_allclose(row[:, 2], 0.25)
    assert row[:, [0, 1, 3]].sum() == 0


def test_continuous_scaling_identities():
    sc = continuous_scaling(Geometry(1, 1, 1))
    assert sc.adjoint_factor == pytest.approx(math.sqrt(2) * math.pi, rel=1e-15)
    for geo in (Geometry(1, 1, 1), Geometry(32, 64, 47)):
        sc = continuous_scaling(geo)
        assert sc.sigma_factor**2 == pytest.approx(sc.adjoint_factor, rel=1e-14)
        assert sc.Pi_factor * geo.image_size**2 == pytest.approx(1.0, rel=1e-15)
        assert sc.Gamma_factor**2 == pytest.approx(sc.Pi_factor * sc.Delta_factor, rel=1e-14)


def test_dump_round_trip(small_op, tmp_path):
    small_op.dump(tmp_path)
    header = json.loads((tmp_path / "geometry.json").read_text())
    assert header["geometry"] == small_op.geometry.to_dict()
    data = np.loadtxt(tmp_path / "triplets.csv", delimiter=",", skiprows=1)
    dense = np.zeros(small_op.shape)
    dense[data[:, 0].astype(int), data[:, 1].astype(int)] = data[:, 2]
    np.testing.assert_array_equal(dense, small_op.toarray())

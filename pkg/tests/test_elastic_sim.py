import numpy as np
import pytest

from ribbonlab.constructions import psi_config
from ribbonlab.elastic_sim import (Config3, Grid3, SurfaceConfig, SurfaceGrid, energy3d,
                                   fundamental_forms, lift_planar, reduced_energy, sample_map)
from ribbonlab.errors import DomainError, GeometryError
from ribbonlab.frames import expm_skew, hat
from ribbonlab.geometry import preset
from ribbonlab.harness import init_ruled
from ribbonlab.quadratic_forms import IsotropicModuli


def _surface(grid, fun):
    Z1, Z2 = grid.mesh()
    return SurfaceConfig(grid, fun(Z1, Z2))


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid3(3, 4, 3)
    with pytest.raises(ValueError):
        Config3(Grid3(4, 2, 2), np.zeros((4, 2, 3, 3)))
    with pytest.raises(ValueError):
        SurfaceGrid(5, 9, 0.1)


def test_energy3d_gradient_matches_differences():
    g = preset("arc_bend")
    w, t = 0.2, 0.05
    grid = Grid3(8, 4, 3)
    rng = np.random.default_rng(0)
    base = sample_map(psi_config(g, t, w), grid).u
    moduli = IsotropicModuli(1.0, 0.5)
    for k in range(20):
        u = Config3(grid, base + 1e-2 * rng.standard_normal(base.shape) * [1, w, t])
        _, grad = energy3d(g, moduli, t, w, u, gradient=True)
        idx = tuple(rng.integers(0, s) for s in grid.shape) + (int(rng.integers(3)),)
        h = 1e-6 * [1, w, t][idx[-1]]
        up, um = u.u.copy(), u.u.copy()
        up[idx] += h
        um[idx] -= h
        fd = (energy3d(g, moduli, t, w, Config3(grid, up))
              - energy3d(g, moduli, t, w, Config3(grid, um))) / (2 * h)
        assert grad[idx] == pytest.approx(fd, rel=1e-6, abs=1e-6 * np.abs(grad).max())


def test_energy3d_frame_invariance():
    g = preset("umbilic")
    w, t = 0.1, 0.02
    grid = Grid3(8, 4, 3)
    u = sample_map(psi_config(g, t, w), grid).u
    u = u + 1e-3 * np.random.default_rng(1).standard_normal(u.shape)
    R = expm_skew(hat(np.array([0.3, -1.1, 2.0])))
    e0 = energy3d(g, None, t, w, Config3(grid, u))
    e1 = energy3d(g, None, t, w, Config3(grid, u @ R.T + [1.0, -2.0, 0.5]))
    assert e1 == pytest.approx(e0, rel=1e-12)


def test_euclidean_reference_has_zero_energy():
    g = preset("euclidean")
    w, t = 0.1, 0.01
    assert energy3d(g, None, t, w, psi_config(g, t, w)) == pytest.approx(0.0, abs=1e-20)
    grid = Grid3(6, 3, 2)
    assert energy3d(g, None, t, w, sample_map(psi_config(g, t, w), grid)) == pytest.approx(
        0.0, abs=1e-20)


def test_sampling_converges_under_refinement():
    g = preset("arc_twist")
    w = 0.2
    t = w ** 4
    psi = psi_config(g, t, w)
    ref = energy3d(g, None, t, w, psi)
    errs = [abs(energy3d(g, None, t, w, sample_map(psi, Grid3(*n))) - ref)
            for n in ((9, 3, 3), (17, 5, 5), (33, 9, 9))]
    assert errs[0] / errs[1] >= 3
    assert errs[1] / errs[2] >= 3


def test_fundamental_forms_plane_cylinder_sphere():
    grid = SurfaceGrid(21, 11, 0.2)
    a, II, nu, _ = fundamental_forms(_surface(grid, lambda x, y: np.stack([x, y, 0 * x], -1)))
    np.testing.assert_allclose(a, np.broadcast_to(np.eye(2), a.shape), atol=1e-12)
    np.testing.assert_allclose(II, 0.0, atol=1e-12)

    r = 2.0
    cyl = lambda x, y: np.stack([r * np.sin(x / r), y, r * (1 - np.cos(x / r))], -1)
    a, II, nu, _ = fundamental_forms(_surface(grid, cyl))
    np.testing.assert_allclose(a[..., 0, 0], 1.0, atol=1e-6)
    np.testing.assert_allclose(np.abs(II[..., 0, 0]), 1 / r, atol=1e-5)
    np.testing.assert_allclose(II[..., 1, 1], 0.0, atol=1e-8)

    def sphere(x, y):
        th, ph = x / r, y / r
        return r * np.stack([np.cos(ph) * np.sin(th), np.sin(ph), np.cos(ph) * np.cos(th)], -1)

    a, II, _, _ = fundamental_forms(_surface(SurfaceGrid(41, 21, 0.4), sphere))
    K = np.linalg.det(II) / np.linalg.det(a)
    np.testing.assert_allclose(K, 1 / r ** 2, rtol=1e-5)


def test_fundamental_forms_reject_degenerate_surface():
    grid = SurfaceGrid(8, 6, 0.1)
    with pytest.raises(GeometryError):
        fundamental_forms(_surface(grid, lambda x, y: np.stack([x, 0 * y, 0 * x], -1)))


def test_reduced_energy_of_planar_lift():
    c, w, t = 1.0, 0.1, 0.03
    g = preset("umbilic", c=c)
    f = lift_planar(g, SurfaceGrid(21, 9, w))
    e, s, b = reduced_energy(g, t, w, f, parts=True)
    assert s == pytest.approx(0.0, abs=1e-20)
    # II_f = 0 against II = c I: |c I|^2 = 2 c^2 at every point
    assert e == pytest.approx(2 * c * c * t * t, rel=1e-10)


def test_reduced_energy_gradient_matches_differences():
    g = preset("graded", m=0.3)
    w, t = 0.05, 0.01
    grid = SurfaceGrid(13, 7, w)
    rng = np.random.default_rng(2)
    f0 = lift_planar(g, grid).f
    f0 = f0 + 1e-3 * rng.standard_normal(f0.shape)
    _, grad = reduced_energy(g, t, w, SurfaceConfig(grid, f0), gradient=True)
    for _ in range(10):
        idx = tuple(rng.integers(0, s) for s in f0.shape)
        h = 1e-6
        fp, fm = f0.copy(), f0.copy()
        fp[idx] += h
        fm[idx] -= h
        fd = (reduced_energy(g, t, w, SurfaceConfig(grid, fp))
              - reduced_energy(g, t, w, SurfaceConfig(grid, fm))) / (2 * h)
        assert grad[idx] == pytest.approx(fd, rel=1e-6, abs=1e-6 * np.abs(grad).max())


def test_ruled_start_has_no_stretching():
    g = preset("graded")
    w = 0.05
    f = init_ruled(g, SurfaceGrid(41, 9, w))
    _, s, _ = reduced_energy(g, 1e-3, w, f, parts=True)
    assert s <= 1e-8


def test_reduced_energy_rejects_width_mismatch():
    g = preset("graded")
    f = lift_planar(g, SurfaceGrid(8, 6, 0.1))
    with pytest.raises(DomainError):
        reduced_energy(g, 0.01, 0.05, f)

import numpy as np
import pytest

from ribbonlab.constructions import (AnalyticConfig3, ansatz_field, darboux_frame,
                                     delta_threshold, field_surface, gc_residual,
                                     immersion_strip_field, psi_config, recovery_narrow_codazzi,
                                     recovery_narrow_gauss, ruled_isometry, strip_metric_field,
                                     surface_from_forms, StripField)
from ribbonlab.errors import DomainError
from ribbonlab.fields import sym2
from ribbonlab.geometry import midsurface_metric, preset
from ribbonlab.harness import fit_exponent
from ribbonlab.limit_energies import plate_energy


def _points(n=12, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-0.5, 0.5, (n, 3))
    x[:, 0] = rng.uniform(0.1, 0.9, n)
    return x


def _fd_grad(cfg, x):
    return AnalyticConfig3(cfg.value, cfg.t, cfg.w, step=1e-4).grad_t(x)


@pytest.mark.parametrize("builder, name", [
    (recovery_narrow_gauss, "umbilic"),
    (recovery_narrow_codazzi, "graded"),
])
def test_recovery_gradient_matches_differences(builder, name):
    w = 0.05
    t = w ** 1.5
    cfg = builder(preset(name), t=t, w=w)
    x = _points()
    G = cfg.grad_t(x)
    np.testing.assert_allclose(G, _fd_grad(cfg, x), atol=1e-6 * np.abs(G).max())


def test_recovery_frame_stays_orthogonal():
    cfg = recovery_narrow_gauss(preset("umbilic"), t=1e-3, w=0.01)
    assert cfg.Rc.orthogonality_drift() <= 1e-9


def test_codazzi_recovery_needs_gauss_compatibility():
    with pytest.raises(DomainError):
        recovery_narrow_codazzi(preset("umbilic"), t=1e-3, w=0.01)


def test_psi_gradient_matches_differences():
    w = 0.1
    cfg = psi_config(preset("arc_twist"), w ** 4, w)
    x = _points(seed=3)
    G = cfg.grad_t(x)
    np.testing.assert_allclose(G, _fd_grad(cfg, x), atol=1e-6 * np.abs(G).max())


def test_darboux_frame_constant_curvature_circle():
    P = darboux_frame(2.0, 0.0, 0.0)
    s = np.linspace(0, 1, 9)
    pos = P.position(s)
    np.testing.assert_allclose(np.linalg.norm(pos - [0, 0.5, 0], axis=-1), 0.5, atol=1e-10)


@pytest.mark.parametrize("name, params", [
    ("arc_bend", {}),
    ("graded", {"m": 0.3, "kappa": 0.2}),
    ("const", {"kappa": 0.3, "l": 1.0, "m": 0.5, "n": 0.25}),
])
def test_ruled_isometry_is_isometric(name, params):
    g = preset(name, **params)
    w = 0.05
    R = ruled_isometry(g, 0.0, 0.0, w)
    Z1, Z2 = np.meshgrid(np.linspace(0, 1, 11), np.linspace(-w / 2, w / 2, 5), indexing="ij")
    np.testing.assert_allclose(R.first_form(Z1, Z2), midsurface_metric(g, Z1, Z2), atol=1e-8)
    s = np.linspace(0.05, 0.95, 9)
    np.testing.assert_allclose(R.second_form(s, 0 * s), R.A(s), atol=1e-6)
    assert R.r.orthogonality_drift() <= 1e-9


def test_ruled_isometry_jacobian_matches_differences():
    g = preset("graded", m=0.3, kappa=0.2)
    R = ruled_isometry(g, 0.1, -0.2, 0.05)
    z1, z2 = np.array([0.2, 0.5, 0.8]), np.array([-0.02, 0.0, 0.015])
    h = 1e-5
    d1 = (R.value(z1 + h, z2) - R.value(z1 - h, z2)) / (2 * h)
    d2 = (R.value(z1, z2 + h) - R.value(z1, z2 - h)) / (2 * h)
    np.testing.assert_allclose(R.jacobian(z1, z2), np.stack([d1, d2], -1), atol=1e-8)


def test_ruled_isometry_rejects_curved_forms():
    with pytest.raises(DomainError):
        ruled_isometry(preset("umbilic"), w=0.05)
    with pytest.raises(DomainError):
        ruled_isometry(preset("arc_twist"), w=0.05)   # II0_11 = 0


def test_ruled_plate_energy_is_codazzi_limit():
    g = preset("graded")
    for w in (0.04, 0.02):
        R = ruled_isometry(g, 0.0, 0.0, w)
        e = plate_energy(g, w, immersion_strip_field(R, w))
        assert e / w ** 2 == pytest.approx(2 / 144, rel=1e-3)


def test_surface_from_forms_plane_and_cylinder():
    flat = StripField(lambda x1, x2: np.broadcast_to(np.eye(2), np.shape(x1) + (2, 2)),
                      lambda x1, x2: (np.zeros(np.shape(x1) + (2, 2)),) * 2)
    zero = StripField(lambda x1, x2: np.zeros(np.shape(x1) + (2, 2)),
                      lambda x1, x2: (np.zeros(np.shape(x1) + (2, 2)),) * 2)
    S, res = surface_from_forms(flat, zero, n=(17, 17))
    assert res <= 1e-12
    np.testing.assert_allclose(S.points[..., 2], 0.0, atol=1e-12)
    cyl = StripField(lambda x1, x2: sym2(np.stack(np.broadcast_arrays(1.0 + 0 * x1, 0.0, 0.0), -1)),
                     lambda x1, x2: (np.zeros(np.shape(x1) + (2, 2)),) * 2)
    S, res = surface_from_forms(flat, cyl, n=(33, 9))
    assert res <= 1e-10
    # unit-radius cylinder: distance from its axis is 1
    P = S.points.reshape(-1, 3)
    axis_dist = np.hypot(P[:, 0], P[:, 2] - 1.0)
    np.testing.assert_allclose(axis_dist, 1.0, atol=1e-6)


def test_surface_from_forms_detects_incompatible_forms():
    flat = StripField(lambda x1, x2: np.broadcast_to(np.eye(2), np.shape(x1) + (2, 2)))
    II = StripField(lambda x1, x2: sym2(np.stack(np.broadcast_arrays(0 * x1, 0 * x1, x1), -1)))
    _, res = surface_from_forms(flat, II, n=(33, 33))
    assert res >= 1e-3


def test_field_surface_reproduces_ruled_second_form():
    g = preset("arc_bend")
    w = 0.05
    R = ruled_isometry(g, 0.0, 0.0, w)
    S, res = field_surface(g, w, immersion_strip_field(R, w), n=(81, 9))
    assert res <= 1e-5
    s = np.linspace(0.1, 0.9, 5)
    np.testing.assert_allclose(S.second_form(s, 0 * s), R.A(s), atol=1e-4)


def test_strip_metric_partials():
    g = preset("arc_bend", kappa=0.7)
    a = strip_metric_field(g)
    d1, d2 = a.partials(np.array([0.3]), np.array([0.02]))
    h = 1e-6
    fd2 = (a(0.3, 0.02 + h) - a(0.3, 0.02 - h)) / (2 * h)
    np.testing.assert_allclose(d2[0], fd2, atol=1e-8)


@pytest.mark.parametrize("which, geom", [("d", preset("arc_twist")), ("b", preset("ramp"))])
def test_ansatz_satisfies_gauss_codazzi(which, geom):
    rng = np.random.default_rng(4)
    x1, x2 = rng.uniform(0, 1, 50), rng.uniform(-0.5, 0.5, 50)
    for w in (1e-3, 1e-2):
        f = ansatz_field(which, w, geom=geom, with_energy=False)
        det, cod = gc_residual(geom, w, f, x1, x2)
        assert np.abs(det).max() <= 1e-8
        assert np.abs(cod).max() <= 1e-8


def test_ansatz_partials_match_differences():
    f = ansatz_field("d", 1e-2, with_energy=False)
    x1, x2 = np.array([0.3, 0.7]), np.array([-0.2, 0.4])
    analytic = f.partials(x1, x2)
    numeric = StripField(f.__call__).partials(x1, x2)
    for a, b in zip(analytic, numeric):
        np.testing.assert_allclose(a, b, atol=1e-7)


def test_ansatz_delta_threshold():
    w = 1e-2
    thr = delta_threshold(1.0, w)
    with pytest.raises(DomainError):
        ansatz_field("d", w, delta=0.5 * thr, with_energy=False)
    assert ansatz_field("d", 1e-3).energy > 0


@pytest.mark.parametrize("which, slope", [("d", 2 / 3), ("b", 1.0)])
def test_ansatz_energy_scaling(which, slope):
    recs = [{"w": w, "energy": ansatz_field(which, w).energy}
            for w in np.geomspace(1e-2, 1e-4, 5)]
    assert fit_exponent(recs, "w").slope == pytest.approx(slope, abs=0.1)

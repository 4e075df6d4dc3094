"""End-to-end acceptance runs.  Each test prints one PASS/FAIL line."""

import time

import numpy as np
import pytest

from conftest import record_criterion
from oracles import grid_then_refine, jdensity_oracle, q2_oracle, q3_isotropic
from ribbonlab.constructions import (AnalyticConfig3, ansatz_field, gc_residual,
                                     psi_config, recovery_narrow_codazzi,
                                     recovery_narrow_gauss, ruled_isometry, surface_from_forms,
                                     StripField)
from ribbonlab.elastic_sim import (Config3, Grid3, SurfaceConfig, SurfaceGrid, energy3d,
                                   lift_planar, reduced_energy, sample_map)
from ribbonlab.fields import sym2
from ribbonlab.geometry import build_euclidean_ribbon, codazzi_deficit, midsurface_metric, preset
from ribbonlab.harness import SweepSpec, fit_exponent, run_sweep
from ribbonlab.limit_energies import codazzi_i, e0_codazzi, e0_gauss, min_j
from ribbonlab.quadratic_forms import (IsotropicModuli, alpha_pm, isotropic_q2, q1, q2_circ,
                                       q3_at_identity, relax_to_2x2)

UMBILIC_CS = (0.5, 1.0, 2.0, 3.0)
WIDTHS = tuple(np.geomspace(0.1, 0.02, 5))


def _gap_constant():
    """Least-squares c in gap = c |kappa_1| over umbilic presets."""
    gaps, ks = [], []
    for c in UMBILIC_CS:
        r = min_j(preset("umbilic", c=c))
        gaps.append(np.min(np.linalg.norm(r.M - preset("umbilic", c=c).II0(r.x), axis=(-2, -1))))
        ks.append(np.min(r.kappa1))
    gaps, ks = np.array(gaps), np.array(ks)
    return float(gaps @ ks / (ks @ ks))


def _fit_energy3d(geom, exponent, ws, make):
    recs = []
    for w in ws:
        t = w ** exponent
        recs.append({"w": w, "energy": energy3d(geom, None, t, w, make(geom, t, w))})
    return fit_exponent(recs, "w")


def _plate_slope(which, geom):
    recs = [{"w": w, "energy": ansatz_field(which, w, geom=geom).energy}
            for w in np.geomspace(1e-2, 1e-4, 5)]
    return fit_exponent(recs, "w").slope


def test_criterion_01_deficits():
    t0 = time.perf_counter()
    x = np.linspace(0, 1, 201)
    kappa, n = 1.3, -0.7
    dd = codazzi_deficit(preset("arc_twist", kappa=kappa, n=n), x)
    db = codazzi_deficit(preset("ramp"), x)
    err = max(np.abs(dd - [kappa * n, 0.0]).max(), np.abs(db - [0.0, -1.0]).max())
    dt = time.perf_counter() - t0
    ok = err <= 1e-14 and dt < 1.0
    record_criterion(1, ok, f"max deficit error {err:.1e}, {dt:.2f} s")
    assert ok


def test_criterion_02_quadratic_forms():
    t0 = time.perf_counter()
    mu, lam = 1.0, 0.6
    q3 = q3_at_identity(IsotropicModuli(mu, lam))
    q2, _ = relax_to_2x2(q3)
    form3 = lambda B: q3_isotropic(B, mu, lam)
    errs = []
    for A in (sym2([0.3, -0.7, 1.2]), sym2([1.0, 0.0, 0.0]), sym2([-0.4, 0.5, 0.25])):
        errs.append(abs(q2(A) - q2_oracle(A, q3=form3)[0]))

    def build(u, a, b):
        u = np.atleast_2d(u)
        B = np.zeros((len(u), 3, 3))
        B[:, 0, 0], B[:, 0, 1], B[:, 1, 0] = a, b, b
        B[:, 1, 1], B[:, 0, 2], B[:, 1, 2], B[:, 2, 0], B[:, 2, 1], B[:, 2, 2] = u.T
        return B

    a, b = 0.8, -0.3
    val = grid_then_refine(lambda u: float(form3(build(u, a, b))[0]), 6, per_axis=5,
                           batch=lambda P: form3(build(P, a, b)))[0]
    errs.append(abs(q2_circ(q2, a, b)[0] - val))

    def build1(u):
        u = np.atleast_2d(u)
        return build(u[:, 1:], 1.0, u[:, 0])

    val = grid_then_refine(lambda u: float(form3(build1(u))[0]), 7, per_axis=4,
                           batch=lambda P: form3(build1(P)))[0]
    errs.append(abs(q1(q2)[0] - val))
    oracle_err = max(errs)

    closed = IsotropicModuli(mu, lam)
    c = 2 * mu * lam / (2 * mu + lam)
    closed_err = max(np.abs(q2.matrix - isotropic_q2(closed).matrix).max(),
                     abs(q1(q2)[0] - (2 * mu + 2 * mu * c / (2 * mu + c))))
    ap, am = alpha_pm(isotropic_q2(IsotropicModuli(1.0, 0.0)))
    a_err = max(abs(ap - 4), abs(am - 4))
    dt = time.perf_counter() - t0
    ok = oracle_err <= 1e-6 and closed_err <= 1e-10 and a_err <= 1e-6 and dt < 10
    record_criterion(2, ok, f"oracle {oracle_err:.1e}, closed {closed_err:.1e}, "
                            f"alpha {a_err:.1e}, {dt:.1f} s")
    assert ok


def test_criterion_03_min_j_dichotomy():
    t0 = time.perf_counter()
    zero = max(min_j(preset(n)).value for n in ("ramp", "arc_bend", "arc_twist", "graded"))
    q2 = isotropic_q2(IsotropicModuli())
    ap, am = alpha_pm(q2)
    oracle = jdensity_oracle(np.eye(2), ap, am, q2)[0] / 12.0
    err = abs(min_j(preset("umbilic", c=1.0)).value - oracle)
    c_fit = _gap_constant()
    dt = time.perf_counter() - t0
    ok = zero <= 1e-10 and err <= 1e-6 and c_fit > 0 and dt < 30
    record_criterion(3, ok, f"rank-one max {zero:.1e}, oracle gap {err:.1e}, "
                            f"fitted c {c_fit:.3f}, {dt:.1f} s")
    assert ok


def _recovery_ratios(builder, geom, limit, scale):
    errs = []
    for w in (0.04, 0.02, 0.01):
        t = w ** 1.5
        e = energy3d(geom, None, t, w, builder(geom, t=t, w=w))
        errs.append(abs(e / scale(t, w) - limit) / limit)
    return errs


def test_criterion_04_recovery_gauss():
    t0 = time.perf_counter()
    g = preset("umbilic", c=1.0)
    errs = _recovery_ratios(recovery_narrow_gauss, g, e0_gauss(g), lambda t, w: w ** 4)
    dt = time.perf_counter() - t0
    ok = errs[-1] <= 0.05 and errs[0] > errs[1] > errs[2] and dt < 120
    record_criterion(4, ok, "relative errors " + ", ".join(f"{e:.2%}" for e in errs)
                     + f", {dt:.1f} s")
    assert ok


def test_criterion_05_recovery_codazzi():
    t0 = time.perf_counter()
    g = preset("graded")
    errs = _recovery_ratios(recovery_narrow_codazzi, g, e0_codazzi(g),
                            lambda t, w: (t * w) ** 2)
    dt = time.perf_counter() - t0
    ok = errs[-1] <= 0.05 and errs[0] > errs[1] > errs[2] and dt < 120
    record_criterion(5, ok, "relative errors " + ", ".join(f"{e:.2%}" for e in errs)
                     + f", {dt:.1f} s")
    assert ok


@pytest.mark.slow
def test_criterion_06_gauss_transition(tmp_path):
    t0 = time.perf_counter()
    params = {"c": 3.0}
    narrow = run_sweep(SweepSpec("umbilic", params, "narrow", 1.5, WIDTHS,
                                 solver={"n1": 41, "n2": 9, "maxiter": 20000}))
    wide = run_sweep(SweepSpec("umbilic", params, "wide", 3.0, WIDTHS,
                               solver={"n1": 41, "n2": 9, "maxiter": 5000}))
    s_n = fit_exponent(narrow, "w").slope
    s_w = fit_exponent(wide, "t").slope
    kappa1 = params["c"]
    c_fit = _gap_constant()
    gap_n = max(r.extra["midline_gap"] for r in narrow)
    gap_w = min(r.extra["midline_gap"] for r in wide)
    dt = time.perf_counter() - t0
    ok = (3.6 <= s_n <= 4.4 and 1.8 <= s_w <= 2.2 and gap_n <= 0.05
          and gap_w >= 0.1 * c_fit * kappa1 and dt < 900)
    record_criterion(6, ok, f"narrow slope {s_n:.3f}, wide slope(t) {s_w:.3f}, "
                            f"gaps {gap_n:.3f}/{gap_w:.3f}, {dt:.0f} s")
    assert ok


@pytest.mark.slow
def test_criterion_07_codazzi_no_transition():
    t0 = time.perf_counter()
    g = preset("graded")
    solver = {"n1": 41, "n2": 9, "maxiter": 5000}
    recs = (run_sweep(SweepSpec("graded", {}, "narrow", 1.5, WIDTHS, solver=solver))
            + run_sweep(SweepSpec("graded", {}, "wide", 3.0, WIDTHS, solver=solver)))
    band = np.array([r.e_div_t2w2 for r in recs])
    ratio = band.max() / band.min()
    plate = run_sweep(SweepSpec("graded", {}, "plate", ws=(0.04, 0.02, 0.01),
                                evaluator="plate", construction="ruled"))
    target = codazzi_i(g)
    rel = abs(plate[0].e_div_t2w2 - target) / target
    dt = time.perf_counter() - t0
    ok = ratio <= 3 and rel <= 0.2 and dt < 600
    record_criterion(7, ok, f"band {band.min():.4f}..{band.max():.4f} (x{ratio:.2f}), "
                            f"plate limit error {rel:.2%}, {dt:.0f} s")
    assert ok


def test_criterion_08_twisted_arc():
    t0 = time.perf_counter()
    g = preset("arc_twist")
    s_plate = _plate_slope("d", g)
    s_psi = _fit_energy3d(g, 4.0, np.geomspace(0.2, 0.05, 5), psi_config).slope
    dt = time.perf_counter() - t0
    ok = abs(s_plate - 2 / 3) <= 0.1 and abs(s_psi - 6) <= 0.3 and dt < 120
    record_criterion(8, ok, f"plate slope {s_plate:.3f}, Psi slope {s_psi:.3f}, {dt:.1f} s")
    assert ok


def test_criterion_09_ramp():
    t0 = time.perf_counter()
    g = preset("ramp")
    s_plate = _plate_slope("b", g)
    s_psi = _fit_energy3d(g, 5.0, np.geomspace(0.2, 0.05, 5), psi_config).slope
    flat = StripField(lambda x1, x2: np.broadcast_to(np.eye(2), np.shape(x1) + (2, 2)))
    II = StripField(lambda x1, x2: sym2(np.stack(np.broadcast_arrays(0 * x1, 0 * x1, x1), -1)))
    _, resid = surface_from_forms(flat, II, n=(33, 33))
    dt = time.perf_counter() - t0
    ok = abs(s_plate - 1) <= 0.1 and abs(s_psi - 8) <= 0.5 and resid >= 1e-3 and dt < 120
    record_criterion(9, ok, f"plate slope {s_plate:.3f}, Psi slope {s_psi:.3f} (target 8), "
                            f"path residual {resid:.2e}, {dt:.1f} s")
    assert ok


def test_criterion_10_construction_fidelity():
    t0 = time.perf_counter()
    w = 0.05
    iso, mid = 0.0, 0.0
    for name, p in (("arc_bend", {}), ("graded", {"m": 0.3, "kappa": 0.2}),
                    ("const", {"kappa": 0.3, "l": 1.0, "m": 0.5, "n": 0.25})):
        g = preset(name, **p)
        R = ruled_isometry(g, 0.0, 0.0, w)
        Z1, Z2 = np.meshgrid(np.linspace(0, 1, 21), np.linspace(-w / 2, w / 2, 7), indexing="ij")
        iso = max(iso, np.abs(R.first_form(Z1, Z2) - midsurface_metric(g, Z1, Z2)).max())
        s = np.linspace(0, 1, 21)
        mid = max(mid, np.abs(R.second_form(s, 0 * s) - R.A(s)).max())
    rng = np.random.default_rng(0)
    x1, x2 = rng.uniform(0, 1, 200), rng.uniform(-0.5, 0.5, 200)
    gc = 0.0
    for which, g in (("d", preset("arc_twist")), ("b", preset("ramp"))):
        for wa in (1e-4, 1e-3, 1e-2):
            det, cod = gc_residual(g, wa, ansatz_field(which, wa, geom=g, with_energy=False),
                                   x1, x2)
            gc = max(gc, np.abs(det).max(), np.abs(cod).max())
    dt = time.perf_counter() - t0
    ok = iso <= 1e-8 and mid <= 1e-6 and gc <= 1e-8 and dt < 60
    record_criterion(10, ok, f"isometry {iso:.1e}, midline form {mid:.1e}, "
                             f"Gauss-Codazzi {gc:.1e}, {dt:.1f} s")
    assert ok


def _fd_rel_error(energy_fn, x, grad, rng, steps, count=10):
    worst = 0.0
    for _ in range(count):
        idx = tuple(int(rng.integers(0, s)) for s in x.shape)
        h = steps[idx[-1]] if len(steps) == x.shape[-1] else steps[0]
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        fd = (energy_fn(xp) - energy_fn(xm)) / (2 * h)
        worst = max(worst, abs(grad[idx] - fd) / max(abs(fd), np.abs(grad).max()))
    return worst


def test_criterion_11_numerical_hygiene(tmp_path):
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    errs = {}

    g = preset("arc_bend")
    w, t = 0.2, 0.05
    grid = Grid3(8, 4, 3)
    u0 = sample_map(psi_config(g, t, w), grid).u
    u0 = u0 + 1e-2 * rng.standard_normal(u0.shape) * [1, w, t]
    e3 = lambda u: energy3d(g, None, t, w, Config3(grid, u))
    _, gr = energy3d(g, None, t, w, Config3(grid, u0), gradient=True)
    errs["energy3d"] = _fd_rel_error(e3, u0, gr, rng, [1e-6, 1e-6 * w, 1e-6 * t])

    g2 = preset("graded", m=0.3)
    sg = SurfaceGrid(13, 7, 0.05)
    f0 = lift_planar(g2, sg).f + 1e-3 * rng.standard_normal((13, 7, 3))
    er = lambda f: reduced_energy(g2, 0.01, 0.05, SurfaceConfig(sg, f))
    _, gr = reduced_energy(g2, 0.01, 0.05, SurfaceConfig(sg, f0), gradient=True)
    errs["reduced"] = _fd_rel_error(er, f0, gr, rng, [1e-6])

    x = np.column_stack([rng.uniform(0.1, 0.9, 10), rng.uniform(-0.5, 0.5, (10, 2))])
    for label, cfg in (("recovery-gauss", recovery_narrow_gauss(preset("umbilic"), t=0.05 ** 1.5,
                                                                w=0.05)),
                       ("recovery-codazzi", recovery_narrow_codazzi(preset("graded"),
                                                                    t=0.05 ** 1.5, w=0.05)),
                       ("psi", psi_config(preset("arc_twist"), 1e-4, 0.1))):
        G = cfg.grad_t(x)
        Gfd = AnalyticConfig3(cfg.value, cfg.t, cfg.w, step=1e-4).grad_t(x)
        errs[label] = np.abs(G - Gfd).max() / np.abs(G).max()

    R = ruled_isometry(preset("graded", m=0.3, kappa=0.2), 0.1, -0.2, 0.05)
    z1, z2, h = np.array([0.2, 0.5, 0.8]), np.array([-0.02, 0.0, 0.015]), 1e-5
    J = np.stack([(R.value(z1 + h, z2) - R.value(z1 - h, z2)) / (2 * h),
                  (R.value(z1, z2 + h) - R.value(z1, z2 - h)) / (2 * h)], -1)
    errs["ruled"] = np.abs(R.jacobian(z1, z2) - J).max()
    grad_err = max(errs.values())

    drift = max(build_euclidean_ribbon(preset(n)).frame.orthogonality_drift()
                for n in ("umbilic", "arc_bend", "arc_twist", "graded", "ramp"))
    drift = max(drift, R.r.orthogonality_drift(), R.chi.P.orthogonality_drift(),
                recovery_narrow_gauss(preset("umbilic"), t=1e-3, w=0.01).Rc.orthogonality_drift())

    same = True
    for workers in (1, 2):
        texts = []
        for k in range(2):
            out = tmp_path / f"w{workers}-{k}"
            run_sweep(SweepSpec("umbilic", {"c": 1.0}, "narrow", 1.5, (0.1, 0.07, 0.05),
                                solver={"n1": 13, "n2": 7, "maxiter": 200, "perturb": 0.1},
                                seed=7, workers=workers, output=str(out)))
            texts.append((out / "records.csv").read_bytes())
        same = same and texts[0] == texts[1]
    dt = time.perf_counter() - t0
    ok = grad_err <= 1e-6 and drift <= 1e-9 and same and dt < 120
    record_criterion(11, ok, f"gradient {grad_err:.1e}, drift {drift:.1e}, "
                             f"byte-identical {same}, {dt:.1f} s")
    assert ok

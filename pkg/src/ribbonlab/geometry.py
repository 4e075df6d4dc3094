"""Ribbon reference geometries, metrics, deficits and the associated Euclidean ribbon.

Coordinates are (z1, z2, z3): arclength along the midline, in-surface
distance across the width and distance across the thickness.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .fields import SmoothField1D, SymField2x2, sym2
from .frames import FramePath

MIN_STRETCH = 0.1     # min of 1 - kappa z2 on admissible strips
MIN_EIG = 0.05        # min metric eigenvalue on admissible domains


@dataclass(frozen=True)
class RibbonGeometry:
    L: float
    kappa: SmoothField1D
    second_form: SymField2x2
    flat: bool = True
    gaussian_curvature: object = None   # callable (z1, z2) or number; ignored when flat
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def K(self, z1, z2=0.0):
        z1 = np.asarray(z1, dtype=float)
        if self.flat or self.gaussian_curvature is None:
            return np.zeros(z1.shape)
        kf = self.gaussian_curvature
        val = kf(z1, z2) if callable(kf) else kf
        return np.broadcast_to(np.asarray(val, dtype=float), z1.shape).copy()

    def II0(self, z1):
        return self.second_form(z1, 0.0)

    def midline_data(self, z1):
        """(l0, m0, n0), their z1-derivative and the z2-derivative (l1, m1, n1)."""
        z1 = np.asarray(z1, dtype=float)
        z2 = np.zeros_like(z1)
        return (self.second_form.lmn(z1, z2), self.second_form.d1_lmn(z1, z2),
                self.second_form.d2_lmn(z1, z2))


# ---------------------------------------------------------------- presets

def _geom(name, L, kappa, form, params):
    return RibbonGeometry(L=float(L), kappa=SmoothField1D.constant(kappa)
                          if np.isscalar(kappa) else kappa,
                          second_form=form, flat=True, name=name, params=dict(params))


def preset(name, **p):
    """Named reference geometries (flat mid-surface).

    euclidean : kappa = 0, II = 0 (compatible)
    umbilic   : II = c I, kappa const (Gauss-incompatible)
    ramp      : kappa = 0, II = diag(0, s z1) (Codazzi-incompatible, l0 = 0)
    arc_bend  : kappa const != 0, II = diag(l, 0) (Codazzi-incompatible, l0 != 0)
    arc_twist : kappa, n const, II = diag(0, n) (Codazzi-incompatible, l0 = 0)
    graded    : II = [[l, m], [m, m^2/l]] + z2 [[l1, m1], [m1, n1]] (l0 != 0)
    const     : constant kappa, K and II = [[l, m], [m, n]] (K != 0 => not flat)
    """
    L = p.pop("L", 1.0)
    if name == "euclidean":
        return _geom(name, L, 0.0, SymField2x2.constant(0, 0, 0), {})
    if name == "umbilic":
        c, k = p.get("c", 1.0), p.get("kappa", 0.0)
        return _geom(name, L, k, SymField2x2.constant(c, 0, c), {"c": c, "kappa": k})
    if name == "ramp":
        s = p.get("s", 1.0)
        form = SymField2x2.polynomial({(1, 0): (0, 0, s)}, label="diag(0,s z1)")
        return _geom(name, L, 0.0, form, {"s": s})
    if name == "arc_bend":
        k, l = p.get("kappa", 0.5), p.get("l", 1.0)
        return _geom(name, L, k, SymField2x2.constant(l, 0, 0), {"kappa": k, "l": l})
    if name == "arc_twist":
        k, n = p.get("kappa", 1.0), p.get("n", 1.0)
        return _geom(name, L, k, SymField2x2.constant(0, 0, n), {"kappa": k, "n": n})
    if name == "graded":
        l, m = p.get("l", 1.0), p.get("m", 0.0)
        l1, m1, n1 = p.get("l1", 1.0), p.get("m1", 0.0), p.get("n1", 0.0)
        k = p.get("kappa", 0.0)
        if l == 0:
            raise DomainError("graded preset needs l != 0")
        form = SymField2x2.polynomial({(0, 0): (l, m, m * m / l), (0, 1): (l1, m1, n1)})
        return _geom(name, L, k, form, {"l": l, "m": m, "l1": l1, "m1": m1, "n1": n1,
                                        "kappa": k})
    if name == "const":
        k, K = p.get("kappa", 0.0), p.get("K", 0.0)
        l, m, n = p.get("l", 0.0), p.get("m", 0.0), p.get("n", 0.0)
        g = _geom(name, L, k, SymField2x2.constant(l, m, n), dict(p))
        if K != 0.0:
            g = RibbonGeometry(L=g.L, kappa=g.kappa, second_form=g.second_form, flat=False,
                               gaussian_curvature=float(K), name=name, params=dict(p))
        return g
    raise KeyError(f"unknown geometry preset {name!r}")


PRESETS = ("euclidean", "umbilic", "ramp", "arc_bend", "arc_twist", "graded", "const")


# ---------------------------------------------------------------- metrics

def metric_at(geom, z, check=True):
    """Truncated model metric at points z (..., 3)."""
    z = np.asarray(z, dtype=float)
    z1, z2, z3 = z[..., 0], z[..., 1], z[..., 2]
    stretch = 1.0 - geom.kappa(z1) * z2
    g = np.zeros(z.shape[:-1] + (3, 3))
    g[..., 0, 0] = stretch ** 2 - geom.K(z1, 0.0) * z2 ** 2
    g[..., 1, 1] = 1.0
    g[..., 2, 2] = 1.0
    g[..., :2, :2] -= 2.0 * z3[..., None, None] * geom.second_form(z1, z2)
    if check:
        lam = np.linalg.eigvalsh(g)[..., 0]
        bad = (stretch < MIN_STRETCH) | (lam < MIN_EIG)
        if np.any(bad):
            zb = z[bad][0] if z.ndim > 1 else z
            raise DomainError(f"metric not admissibly positive definite at z={tuple(zb)}")
    return g


def midsurface_metric(geom, z1, z2, check=True):
    z1, z2 = np.broadcast_arrays(np.asarray(z1, float), np.asarray(z2, float))
    z = np.stack([z1, z2, np.zeros_like(z1)], axis=-1)
    return metric_at(geom, z, check=check)[..., :2, :2]


# ---------------------------------------------------------------- deficits

def gauss_deficit(geom, z1):
    z1 = np.asarray(z1, dtype=float)
    return np.linalg.det(geom.II0(z1)) - geom.K(z1, 0.0)


def codazzi_deficit(geom, z1):
    """(delta_1, delta_2) at (z1, 0), shape (..., 2)."""
    z1 = np.asarray(z1, dtype=float)
    lmn, d1, d2 = geom.midline_data(z1)
    k = geom.kappa(z1)
    c1 = d2[..., 0] - d1[..., 1] + k * (lmn[..., 0] + lmn[..., 2])
    c2 = d2[..., 1] - d1[..., 2] - k * lmn[..., 1]
    return np.stack([c1, c2], axis=-1)


def gauss_deficit_1(geom, z1, tol=1e-10):
    z1 = np.asarray(z1, dtype=float)
    lmn, _, d2 = geom.midline_data(z1)
    det0 = lmn[..., 0] * lmn[..., 2] - lmn[..., 1] ** 2
    if np.any(np.abs(det0) > tol):
        raise DomainError("first-order deficit undefined off the Gauss-compatible stratum "
                          f"(|det II0| = {np.max(np.abs(det0)):.3e})")
    l0, m0, n0 = lmn[..., 0], lmn[..., 1], lmn[..., 2]
    l1, m1, n1 = d2[..., 0], d2[..., 1], d2[..., 2]
    return l1 * n0 + n1 * l0 - 2.0 * m0 * m1


# ---------------------------------------------------------------- planar immersion

def _segments_cross(P):
    """True if the polyline P (n, 2) has two non-adjacent crossing segments."""
    a, b = P[:-1], P[1:]
    n = len(a)
    i, j = np.triu_indices(n, k=2)
    p, r = a[i], b[i] - a[i]
    q, s = a[j], b[j] - a[j]
    rxs = r[:, 0] * s[:, 1] - r[:, 1] * s[:, 0]
    qp = q - p
    ok = np.abs(rxs) > 1e-14
    rxs = np.where(ok, rxs, 1.0)
    tt = (qp[:, 0] * s[:, 1] - qp[:, 1] * s[:, 0]) / rxs
    uu = (qp[:, 0] * r[:, 1] - qp[:, 1] * r[:, 0]) / rxs
    hit = ok & (tt > 0) & (tt < 1) & (uu > 0) & (uu < 1)
    return bool(np.any(hit))


class PlanarImmersion:
    """chi(z1, z2) = int_0^z1 P e1 + z2 P e2 with P' = P [[0, -k], [k, 0]]."""

    def __init__(self, geom, w, extend=0.0, h_max=2e-3):
        self.geom, self.w = geom, float(w)
        kap = geom.kappa
        L = geom.L

        def gen(s):
            k = kap(s)
            out = np.zeros(np.shape(s) + (2, 2))
            out[..., 0, 1] = -k
            out[..., 1, 0] = k
            return out

        self.P = FramePath(gen, -extend, L + extend, anchor=0.0, h_max=h_max)
        self.warnings = []
        s = np.linspace(0.0, L, 401)
        kmax = float(np.max(np.abs(kap(s))))
        if 0.5 * self.w * kmax >= 1.0 - MIN_STRETCH:
            self.warnings.append(f"focal margin violated: w*max|kappa|/2 = {0.5 * w * kmax:.3f}")
        for side in (-0.5, 0.0, 0.5):
            if _segments_cross(self(s, side * self.w * np.ones_like(s))):
                self.warnings.append(f"self-intersection of the curve z2={side}w")
        for msg in self.warnings:
            warnings.warn(msg)

    def __call__(self, z1, z2):
        z1, z2 = np.broadcast_arrays(np.asarray(z1, float), np.asarray(z2, float))
        P = self.P(z1)
        return self.P.position(z1) + z2[..., None] * P[..., :, 1]

    def jacobian(self, z1, z2):
        z1, z2 = np.broadcast_arrays(np.asarray(z1, float), np.asarray(z2, float))
        P = self.P(z1)
        J = P.copy()
        J[..., :, 0] *= (1.0 - self.geom.kappa(z1) * z2)[..., None]
        return J


def planar_immersion(geom, w, extend=0.0):
    if not geom.flat:
        raise DomainError("planar immersion needs a flat mid-surface")
    return PlanarImmersion(geom, w, extend=extend)


# ---------------------------------------------------------------- Euclidean ribbon

def _cross(a, b):
    return np.cross(a, b)


class EuclideanRibbon:
    """Associated Euclidean ribbon Phi, its normal and Psi = Phi + z3 n.

    All first derivatives are analytic (frame ODE plus the closed-form
    cubic profile in z2); Q0(z1) = DPsi(z1, 0, 0) is the Darboux frame.
    """

    def __init__(self, geom, t=None, w=None, h_max=2e-3, a=None, b=None):
        self.geom, self.t, self.w = geom, t, w
        self._kap = geom.kappa
        sf = geom.second_form
        lo = 0.0 if a is None else a
        hi = geom.L if b is None else b

        def gen(s):
            s = np.asarray(s, dtype=float)
            return self._omega(s)

        self._sf = sf
        self.frame = FramePath(gen, lo, hi, anchor=0.0, h_max=h_max)

    def _omega(self, s):
        lmn = self._sf.lmn(s, np.zeros_like(s))
        k = self._kap(s)
        return _skew_darboux(k, lmn[..., 0], lmn[..., 1])

    def Q0(self, z1):
        return self.frame(np.asarray(z1, float))

    def midline(self, z1):
        return self.frame.position(np.asarray(z1, float))

    def _coeffs(self, z1):
        """a = n/2, b1 = -n m/6, b2 = -n^2/6 with z1-derivatives up to 2."""
        z2 = np.zeros_like(z1)
        v = self._sf.lmn(z1, z2)
        d = self._sf.d1_lmn(z1, z2)
        dd = self._sf.d11_lmn(z1, z2)
        m, n = v[..., 1], v[..., 2]
        dm, dn = d[..., 1], d[..., 2]
        ddm, ddn = dd[..., 1], dd[..., 2]
        a = (0.5 * n, 0.5 * dn, 0.5 * ddn)
        b1 = (-n * m / 6, -(dn * m + n * dm) / 6, -(ddn * m + 2 * dn * dm + n * ddm) / 6)
        b2 = (-n * n / 6, -2 * n * dn / 6, -2 * (dn * dn + n * ddn) / 6)
        return a, b1, b2

    def _frame_derivs(self, z1):
        R = self.frame(z1)
        z2 = np.zeros_like(z1)
        v = self._sf.lmn(z1, z2)
        d = self._sf.d1_lmn(z1, z2)
        Om = _skew_darboux(self._kap(z1), v[..., 0], v[..., 1])
        dOm = _skew_darboux(self._kap.d1(z1), d[..., 0], d[..., 1])
        R1 = R @ Om
        R2 = R @ (Om @ Om + dOm)
        return R, R1, R2

    def phi_derivs(self, z1, z2):
        """Phi and its derivatives up to order two: dict of (..., 3) arrays."""
        z1, z2 = np.broadcast_arrays(np.asarray(z1, float), np.asarray(z2, float))
        R, R1, R2 = self._frame_derivs(z1)
        (a, da, dda), (b1, db1, ddb1), (b2, db2, ddb2) = self._coeffs(z1)
        e = [R[..., :, i] for i in range(3)]
        de = [R1[..., :, i] for i in range(3)]
        dde = [R2[..., :, i] for i in range(3)]
        c = self.frame.position(z1)
        Z = z2[..., None]
        A = lambda x: x[..., None]
        cub = A(b1) * e[0] + A(b2) * e[1]
        dcub = A(db1) * e[0] + A(b1) * de[0] + A(db2) * e[1] + A(b2) * de[1]
        ddcub = (A(ddb1) * e[0] + 2 * A(db1) * de[0] + A(b1) * dde[0]
                 + A(ddb2) * e[1] + 2 * A(db2) * de[1] + A(b2) * dde[1])
        ae3 = A(a) * e[2]
        dae3 = A(da) * e[2] + A(a) * de[2]
        ddae3 = A(dda) * e[2] + 2 * A(da) * de[2] + A(a) * dde[2]
        out = {
            "phi": c + Z * e[1] + Z ** 2 * ae3 + Z ** 3 * cub,
            "d1": e[0] + Z * de[1] + Z ** 2 * dae3 + Z ** 3 * dcub,
            "d2": e[1] + 2 * Z * ae3 + 3 * Z ** 2 * cub,
            "d11": de[0] + Z * dde[1] + Z ** 2 * ddae3 + Z ** 3 * ddcub,
            "d12": de[1] + 2 * Z * dae3 + 3 * Z ** 2 * dcub,
            "d22": 2 * ae3 + 6 * Z * cub,
        }
        return out

    def phi(self, z1, z2):
        return self.phi_derivs(z1, z2)["phi"]

    def normal(self, z1, z2):
        """Unit normal and its two partials."""
        D = self.phi_derivs(z1, z2)
        return _normal_from(D)

    def psi(self, z):
        z = np.asarray(z, dtype=float)
        D = self.phi_derivs(z[..., 0], z[..., 1])
        nu, _, _ = _normal_from(D)
        return D["phi"] + z[..., 2:3] * nu

    def dpsi(self, z):
        """DPsi (..., 3, 3), columns d1 Psi, d2 Psi, d3 Psi."""
        z = np.asarray(z, dtype=float)
        D = self.phi_derivs(z[..., 0], z[..., 1])
        nu, dn1, dn2 = _normal_from(D)
        z3 = z[..., 2:3]
        return np.stack([D["d1"] + z3 * dn1, D["d2"] + z3 * dn2, nu], axis=-1)

    def second_form_phi(self, z1, z2):
        """Second fundamental form of Phi (..., 2, 2)."""
        D = self.phi_derivs(z1, z2)
        nu, _, _ = _normal_from(D)
        l = np.sum(D["d11"] * nu, -1)
        m = np.sum(D["d12"] * nu, -1)
        n = np.sum(D["d22"] * nu, -1)
        return sym2(np.stack([l, m, n], -1))

    # rescaled coordinates x in U = (0, L) x (-1/2, 1/2)^2
    def z_of_x(self, x, t=None, w=None):
        t = self.t if t is None else t
        w = self.w if w is None else w
        x = np.asarray(x, dtype=float)
        return np.stack([x[..., 0], w * x[..., 1], t * x[..., 2]], -1)

    def psi_t(self, x, t=None, w=None):
        return self.psi(self.z_of_x(x, t, w))

    def grad_t_psi_t(self, x, t=None, w=None):
        return self.dpsi(self.z_of_x(x, t, w))


def _skew_darboux(k, mu, tau):
    """Generator of r' = r [[0, -k, -mu], [k, 0, -tau], [mu, tau, 0]]."""
    k, mu, tau = np.broadcast_arrays(np.asarray(k, float), np.asarray(mu, float),
                                     np.asarray(tau, float))
    out = np.zeros(k.shape + (3, 3))
    out[..., 0, 1] = -k
    out[..., 1, 0] = k
    out[..., 0, 2] = -mu
    out[..., 2, 0] = mu
    out[..., 1, 2] = -tau
    out[..., 2, 1] = tau
    return out


def _normal_from(D):
    N = _cross(D["d1"], D["d2"])
    nN = np.linalg.norm(N, axis=-1, keepdims=True)
    nu = N / nN
    out = [nu]
    for a, b in (("d11", "d12"), ("d12", "d22")):
        dN = _cross(D[a], D["d2"]) + _cross(D["d1"], D[b])
        out.append((dN - nu * np.sum(nu * dN, -1, keepdims=True)) / nN)
    return tuple(out)


def build_euclidean_ribbon(geom, t=None, w=None, **kw):
    return EuclideanRibbon(geom, t, w, **kw)


# ---------------------------------------------------------------- expansion check

def displayed_expansion(geom, z):
    """Leading-order expression of DPsi^T DPsi (remainders dropped)."""
    z = np.asarray(z, dtype=float)
    z1, z2, z3 = z[..., 0], z[..., 1], z[..., 2]
    II0 = geom.II0(z1)
    out = np.zeros(z.shape[:-1] + (3, 3))
    out[..., 0, 0] = (1 - geom.kappa(z1) * z2) ** 2 - np.linalg.det(II0) * z2 ** 2
    out[..., 1, 1] = 1.0
    out[..., 2, 2] = 1.0
    out[..., :2, :2] -= 2 * z3[..., None, None] * II0
    return out


def _slope(h, r):
    if np.max(r) <= 1e-12:
        return "exact"
    good = r > 1e-300
    return float(np.polyfit(np.log(h[good]), np.log(r[good]), 1)[0])


@dataclass
class ExpansionReport:
    slope_z2: object
    slope_z3: object
    residual_z2: np.ndarray
    residual_z3: np.ndarray
    scales: np.ndarray
    ribbon: EuclideanRibbon

    def x22(self, z1, h=1e-4):
        return extract_x22(self.ribbon, z1, h)


def extract_x22(ribbon, z1, h=1e-4):
    """X22: minus half the z2 z3 coefficient of (g - DPsi^T DPsi)_22."""
    geom = ribbon.geom
    z1 = np.asarray(z1, dtype=float)

    def f(a, b):
        z = np.stack(np.broadcast_arrays(z1, a, b), -1)
        J = ribbon.dpsi(z)
        G = np.einsum("...ki,...kj->...ij", J, J)
        return metric_at(geom, z, check=False)[..., 1, 1] - G[..., 1, 1]

    mixed = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4 * h * h)
    mixed2 = (f(2 * h, 2 * h) - f(2 * h, -2 * h) - f(-2 * h, 2 * h) + f(-2 * h, -2 * h)) / (16 * h * h)
    mixed = (4 * mixed - mixed2) / 3
    return -0.5 * mixed


def expansion_residual(geom, t=None, w=None, z1=None, n_scales=6):
    """Decay orders of DPsi^T DPsi minus its displayed leading expansion."""
    rib = build_euclidean_ribbon(geom, t, w)
    z1 = np.linspace(0.1, 0.9, 5) * geom.L if z1 is None else np.asarray(z1, float)
    w0 = 0.1 if w is None else w
    t0 = 0.1 if t is None else t
    scales = 0.5 ** np.arange(n_scales)
    r2, r3 = [], []
    for s in scales:
        for which, out in ((1, r2), (2, r3)):
            z = np.zeros(z1.shape + (3,))
            z[..., 0] = z1
            z[..., which] = s * (0.5 * w0 if which == 1 else 0.5 * t0)
            J = rib.dpsi(z)
            G = np.einsum("...ki,...kj->...ij", J, J)
            out.append(np.max(np.abs(G - displayed_expansion(geom, z))))
    r2, r3 = np.array(r2), np.array(r3)
    h2 = scales * 0.5 * w0
    h3 = scales * 0.5 * t0
    return ExpansionReport(_slope(h2, r2), _slope(h3, r3), r2, r3, scales, rib)

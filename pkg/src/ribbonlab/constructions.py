"""Explicit configurations: recovery sequences, ruled isometric immersions,
surfaces integrated from prescribed forms, and closed-form second-form ansatzes."""

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .errors import ConstructionError, DomainError
from .fields import SmoothField1D, as_field, sym2
from .frames import FramePath
from .geometry import (_skew_darboux, build_euclidean_ribbon,
                       codazzi_deficit, extract_x22, gauss_deficit, planar_immersion)
from .limit_energies import MidlineState, _q3
from .quadratic_forms import conjugated, q2_circ, relax_to_2x2, schur_relax

_FD = 1e-5


def _d1(fun, x1, h=_FD):
    """Central difference of a vector-valued function of x1."""
    return (fun(x1 + h) - fun(x1 - h)) / (2 * h)


def darboux_frame(kappa, mu, tau, initial=None, a=0.0, b=1.0, h_max=2e-3):
    """r' = r [[0, -k, -mu], [k, 0, -tau], [mu, tau, 0]] with r(a) = initial."""
    k, m, ta = as_field(kappa), as_field(mu), as_field(tau)
    return FramePath(lambda s: _skew_darboux(k(s), m(s), ta(s)), a, b, R0=initial,
                     anchor=a, h_max=h_max)


# ---------------------------------------------------------------- 3D configurations

class AnalyticConfig3:
    """Closed-form deformation u(x) of U with its rescaled gradient.

    `value(x)` maps (..., 3) -> (..., 3).  `grad_t(x)` returns
    (d1 u | d2 u / w | d3 u / t); without an explicit gradient it uses
    fourth-order differences in the physical coordinates z = (x1, w x2, t x3).
    """

    def __init__(self, value, t, w, grad_t=None, step=1e-3, label=""):
        self._value, self._grad = value, grad_t
        self.t, self.w, self.step, self.label = float(t), float(w), step, label

    def value(self, x):
        return self._value(np.asarray(x, dtype=float))

    def grad_t(self, x):
        x = np.asarray(x, dtype=float)
        if self._grad is not None:
            return self._grad(x)
        scale = np.array([1.0, self.w, self.t])
        cols = []
        for i in range(3):
            e = np.zeros(3)
            e[i] = self.step / scale[i]
            f = self._value
            d = (-f(x + 2 * e) + 8 * f(x + e) - 8 * f(x - e) + f(x - 2 * e)) / (12 * self.step)
            cols.append(d)
        return np.stack(cols, axis=-1)


def _monomials(kind, eps, t, w):
    """Polynomial profiles (m, d2 m, d3 m) in (x2, x3) paired with coefficient names."""
    if kind == "gauss":
        return [
            (lambda a, b: (-eps * w * a * b, -eps * w * b, -eps * w * a), "bg0"),
            (lambda a, b: (0.5 * eps * w * w / t * a * a, eps * w * w / t * a, 0 * a), "00g"),
            (lambda a, b: (-0.5 * eps * t * b * b, 0 * a, -eps * t * b), "lam"),
            (lambda a, b: (eps * w / 6 * (a ** 3 - a / 4), eps * w / 6 * (3 * a * a - 0.25),
                           0 * a), "eta2"),
            (lambda a, b: (0.5 * eps * t * (a * a - 1 / 12) * b, eps * t * a * b,
                           0.5 * eps * t * (a * a - 1 / 12)), "eta3"),
        ]
    return [
        (lambda a, b: (-eps * w * a * b, -eps * w * b, -eps * w * a), "bg0"),
        (lambda a, b: (-0.5 * eps * w * a * a * b, -eps * w * a * b, -0.5 * eps * w * a * a),
         "0s0"),
        (lambda a, b: (0.5 * eps * w * w / t * a * a, eps * w * w / t * a, 0 * a), "00g"),
        (lambda a, b: (eps * w * w / (6 * t) * a ** 3, eps * w * w / (2 * t) * a * a, 0 * a),
         "00s"),
        (lambda a, b: (-0.5 * eps * t * b * b, 0 * a, -eps * t * b), "lam"),
        (lambda a, b: (-0.5 * eps * t * a * b * b, -0.5 * eps * t * b * b, -eps * t * a * b),
         "lam1"),
    ]


class RecoveryConfig(AnalyticConfig3):
    """u(x) = p(x1) + Rc(x1) (Q0^T (Psi_t(x) - theta(x1)) + c(x)).

    Rc = Rbar Q0 solves Rc' = Rc ((eps/t) K + Omega), K built from (alpha, beta);
    p' = speed Rc e1.  c(x) is a sum of polynomial profiles in (x2, x3) times
    vector coefficients of x1.  The gradient is analytic except for x1-derivatives
    of the coefficient fields (central differences).
    """

    def __init__(self, ribbon, t, w, eps, kind, coeffs, alpha, beta, speed):
        super().__init__(self._val, t, w, grad_t=self._grad_t, label=f"recovery-{kind}")
        self.ribbon, self.eps, self.kind = ribbon, float(eps), kind
        self.coeffs = coeffs
        self.alpha, self.beta = as_field(alpha), as_field(beta)
        g = ribbon.geom
        r = eps / t

        def gen(s):
            K = _skew_darboux(0 * s, self.alpha(s), self.beta(s))
            return r * K + ribbon._omega(s)

        self.speed = speed
        self.Rc = FramePath(gen, 0.0, g.L, anchor=0.0, h_max=2e-3, speed=speed)
        self.monos = _monomials(kind, eps, t, w)

    def _c_parts(self, x, deriv=True):
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        c = np.zeros(x.shape)
        d1 = np.zeros(x.shape)
        d2 = np.zeros(x.shape)
        d3 = np.zeros(x.shape)
        for prof, name in self.monos:
            m, m2, m3 = prof(x2, x3)
            v = self.coeffs[name](x1)
            c += m[..., None] * v
            if deriv:
                d1 += m[..., None] * _d1(self.coeffs[name], x1)
                d2 += m2[..., None] * v
                d3 += m3[..., None] * v
        return c, d1, d2, d3

    def _local(self, x):
        rib = self.ribbon
        z = rib.z_of_x(x, self.t, self.w)
        Q0 = rib.Q0(x[..., 0])
        rel = rib.psi(z) - rib.midline(x[..., 0])
        return np.einsum("...ki,...k->...i", Q0, rel), Q0, z

    def _val(self, x):
        ell, _, _ = self._local(x)
        c, _, _, _ = self._c_parts(x, deriv=False)
        Rc = self.Rc(x[..., 0])
        return self.Rc.position(x[..., 0]) + np.einsum("...ij,...j->...i", Rc, ell + c)

    def local_gradient(self, x):
        """Q0^T DPsi + X: the rescaled gradient with the rotation Rc factored out."""
        x = np.asarray(x, dtype=float)
        ell, Q0, z = self._local(x)
        D = self.ribbon.dpsi(z)
        G = np.swapaxes(Q0, -1, -2) @ D
        _, c1, c2, c3 = self._c_parts(x)
        x1 = x[..., 0]
        K = _skew_darboux(0 * x1, self.alpha(x1), self.beta(x1))
        col1 = (self.speed(x1) - 1.0)[..., None] * np.array([1.0, 0, 0]) \
            + (self.eps / self.t) * np.einsum("...ij,...j->...i", K, ell) + c1
        X = np.stack([col1, c2 / self.w, c3 / self.t], axis=-1)
        return G + X

    def _grad_t(self, x):
        return self.Rc(x[..., 0]) @ self.local_gradient(x)


def _lambda_column(q3, Q0, A):
    """(B13 + B31, B23 + B32, B33) of the minimizing completion of A."""
    _, comp = relax_to_2x2(q3, Q0)
    B = comp(A)
    return np.stack([B[..., 0, 2] + B[..., 2, 0], B[..., 1, 2] + B[..., 2, 1], B[..., 2, 2]], -1)


def _eta_columns(q3, Q0, dG):
    """Columns (eta_12, eta_22, eta_32) and (eta_13, eta_23, eta_33) realizing Q1 dG^2."""
    q = conjugated(q3, Q0, np.swapaxes(Q0, -1, -2))
    fixed = np.array([0, 3, 6])
    free = np.array([1, 2, 4, 5, 7, 8])
    _, G = schur_relax(q.matrix, fixed, free)
    a = np.zeros(np.shape(dG) + (3,))
    a[..., 0] = -dG
    u = np.einsum("...ij,...j->...i", G, a)
    B = np.zeros(np.shape(dG) + (9,))
    B[..., fixed] = a
    B[..., free] = u
    B = B.reshape(np.shape(dG) + (3, 3))
    return B[..., :, 1], B[..., :, 2], B


def _state_fields(state):
    s = state or MidlineState()
    return as_field(s.alpha), as_field(s.beta), as_field(s.gammabar)


def recovery_narrow_gauss(geom, moduli=None, state=None, t=None, w=None, q3=None,
                          ribbon=None):
    """Recovery configuration for the eps = w^2 regime."""
    q3 = _q3(moduli, q3)
    ribbon = ribbon or build_euclidean_ribbon(geom, t, w)
    eps = w * w
    al, be, ga = _state_fields(state)

    def A_of(x1):
        return sym2(np.stack([al(x1), be(x1), ga(x1)], -1))

    coeffs = {
        "bg0": lambda x1: np.stack([be(x1), ga(x1), 0 * x1], -1),
        "00g": lambda x1: np.stack([0 * x1, 0 * x1, ga(x1)], -1),
        "lam": lambda x1: _lambda_column(q3, ribbon.Q0(x1), A_of(x1)),
        "eta2": lambda x1: _eta_columns(q3, ribbon.Q0(x1), gauss_deficit(geom, x1))[0],
        "eta3": lambda x1: _eta_columns(q3, ribbon.Q0(x1), gauss_deficit(geom, x1))[1],
    }
    speed = SmoothField1D(lambda s: 1.0 + eps / 24.0 * gauss_deficit(geom, s))
    return RecoveryConfig(ribbon, t, w, eps, "gauss", coeffs, al, be, speed)


def recovery_narrow_codazzi(geom, moduli=None, state=None, t=None, w=None, q3=None,
                            ribbon=None, x22_scale=1.0, tol=1e-10):
    """Recovery configuration for the eps = w t regime (Gauss-compatible data)."""
    s = np.linspace(0.0, geom.L, 101)
    if np.max(np.abs(gauss_deficit(geom, s))) > tol:
        raise DomainError("Codazzi recovery needs a Gauss-compatible midline (det II0 = K)")
    q3 = _q3(moduli, q3)
    ribbon = ribbon or build_euclidean_ribbon(geom, t, w)
    eps = w * t
    al, be, ga = _state_fields(state)

    def sigma_and_a22(x1):
        q2, _ = relax_to_2x2(q3, ribbon.Q0(x1))
        dC = codazzi_deficit(geom, x1)
        _, a22 = q2_circ(q2, dC[..., 0], dC[..., 1])
        return x22_scale * extract_x22(ribbon, x1) - a22, a22, dC

    def sigma(x1):
        return sigma_and_a22(x1)[0]

    def lam1(x1):
        _, a22, dC = sigma_and_a22(x1)
        A = sym2(np.stack([dC[..., 0], dC[..., 1], a22], -1))
        return -_lambda_column(q3, ribbon.Q0(x1), A)

    def A_of(x1):
        return sym2(np.stack([al(x1), be(x1), ga(x1)], -1))

    coeffs = {
        "bg0": lambda x1: np.stack([be(x1), ga(x1), 0 * x1], -1),
        "0s0": lambda x1: np.stack([0 * x1, sigma(x1), 0 * x1], -1),
        "00g": lambda x1: np.stack([0 * x1, 0 * x1, ga(x1)], -1),
        "00s": lambda x1: np.stack([0 * x1, 0 * x1, sigma(x1)], -1),
        "lam": lambda x1: _lambda_column(q3, ribbon.Q0(x1), A_of(x1)),
        "lam1": lam1,
    }
    speed = SmoothField1D.constant(1.0)
    return RecoveryConfig(ribbon, t, w, eps, "codazzi", coeffs, al, be, speed)


def psi_config(geom, t, w, ribbon=None):
    """Psi_t as an analytic configuration (gradient from DPsi)."""
    rib = ribbon or build_euclidean_ribbon(geom, t, w)
    return AnalyticConfig3(lambda x: rib.psi_t(x, t, w), t, w,
                           grad_t=lambda x: rib.grad_t_psi_t(x, t, w), label="psi")


# ---------------------------------------------------------------- surfaces

class SurfaceImmersion:
    """Map of the physical strip (z1, z2) into R^3 with first/second derivatives.

    Subclasses provide `value` and `jacobian`; `second_form` defaults to
    fourth-order differences of the jacobian.
    """

    step = 1e-3

    def value(self, z1, z2):
        raise NotImplementedError

    def jacobian(self, z1, z2):
        h = self.step
        f = self.value
        d1 = (-f(z1 + 2 * h, z2) + 8 * f(z1 + h, z2) - 8 * f(z1 - h, z2) + f(z1 - 2 * h, z2)) / (12 * h)
        d2 = (-f(z1, z2 + 2 * h) + 8 * f(z1, z2 + h) - 8 * f(z1, z2 - h) + f(z1, z2 - 2 * h)) / (12 * h)
        return np.stack([d1, d2], -1)

    def normal(self, z1, z2):
        J = self.jacobian(z1, z2)
        n = np.cross(J[..., 0], J[..., 1])
        return n / np.linalg.norm(n, axis=-1, keepdims=True)

    def first_form(self, z1, z2):
        J = self.jacobian(z1, z2)
        return np.swapaxes(J, -1, -2) @ J

    def second_form(self, z1, z2):
        h = self.step
        J = self.jacobian
        nu = self.normal(z1, z2)
        out = []
        for a, b in ((1, 0), (0, 1)):
            Jp2 = J(z1 + 2 * a * h, z2 + 2 * b * h)
            Jp1 = J(z1 + a * h, z2 + b * h)
            Jm1 = J(z1 - a * h, z2 - b * h)
            Jm2 = J(z1 - 2 * a * h, z2 - 2 * b * h)
            out.append((-Jp2 + 8 * Jp1 - 8 * Jm1 + Jm2) / (12 * h))
        H = np.stack(out, -1)                     # (..., 3, 2, 2): d_j d_i f
        II = np.einsum("...k,...kij->...ij", nu, H)
        return 0.5 * (II + np.swapaxes(II, -1, -2))

    def immersion_margin(self, z1, z2):
        J = self.jacobian(z1, z2)
        return np.linalg.norm(np.cross(J[..., 0], J[..., 1]), axis=-1)

    def rescaled(self, w):
        """f_w(x1, x2) = v(x1, w x2)."""
        return lambda x1, x2: self.value(x1, w * np.asarray(x2, float))


class RuledIsometry(SurfaceImmersion):
    """Developable immersion v = k o phi^{-1} o chi of the flat strip.

    Rulings follow the null direction q of A = II0 + w [[alpha, beta], [beta, gamma_w]].
    """

    def __init__(self, geom, alpha, beta, w, extend=0.1, h_max=1e-3, newton_tol=1e-12,
                 margin=1e-8):
        if not geom.flat:
            raise DomainError("ruled isometries need a flat mid-surface")
        self.geom, self.w = geom, float(w)
        self.alpha, self.beta = as_field(alpha), as_field(beta)
        L = geom.L
        self.lo, self.hi = -extend * L, (1 + extend) * L
        s = np.linspace(self.lo, self.hi, 801)
        II0 = geom.II0(s)
        if np.max(np.abs(np.linalg.det(II0))) > 1e-10:
            raise DomainError("ruled isometry needs det II0 = 0 along the midline")
        l0 = II0[..., 0, 0] + self.w * self.alpha(s)
        if np.min(np.abs(l0)) <= margin or np.min(l0) * np.max(l0) <= 0:
            raise DomainError("l0 + w alpha vanishes: the construction needs II0_11 != 0 "
                              "on the (extended) midline")
        self._sgn = np.sign(l0[0])
        self.chi = planar_immersion(geom, w, extend=extend)
        self.r = FramePath(self._gen, self.lo, self.hi, anchor=0.0, h_max=h_max)
        self.newton_tol = newton_tol
        z1 = np.linspace(0, L, 81)
        z2 = np.linspace(-w / 2, w / 2, 9)
        Z1, Z2 = np.meshgrid(z1, z2, indexing="ij")
        self._invert(Z1, Z2)                  # coverage check

    # midline data --------------------------------------------------------
    def A(self, s):
        s = np.asarray(s, dtype=float)
        II0 = self.geom.II0(s)
        w = self.w
        l = II0[..., 0, 0] + w * self.alpha(s)
        m = II0[..., 0, 1] + w * self.beta(s)
        n = m * m / l
        return sym2(np.stack([l, m, n], -1))

    def gamma_w(self, s):
        A = self.A(s)
        return (A[..., 1, 1] - self.geom.II0(s)[..., 1, 1]) / self.w

    def q(self, s):
        A = self.A(s)
        v = np.stack([-A[..., 0, 1], A[..., 0, 0]], -1) * self._sgn
        return v / np.linalg.norm(v, axis=-1, keepdims=True)

    def dq(self, s):
        return _d1(self.q, np.asarray(s, float), 1e-5)

    def _gen(self, s):
        A = self.A(s)
        return _skew_darboux(self.geom.kappa(s), A[..., 0, 0], A[..., 0, 1])

    # planar ruled chart -----------------------------------------------------
    def _wvec(self, s):
        q = self.q(s)
        Jq = np.stack([-q[..., 1], q[..., 0]], -1)
        return self.geom.kappa(s)[..., None] * Jq + self.dq(s)

    def phi(self, t, s):
        P = self.chi.P(t)
        return self.chi.P.position(t) + s[..., None] * np.einsum("...ij,...j->...i", P, self.q(t))

    def dphi(self, t, s):
        P = self.chi.P(t)
        e1 = np.zeros(np.shape(t) + (2,))
        e1[..., 0] = 1.0
        c1 = e1 + s[..., None] * self._wvec(t)
        return P @ np.stack([c1, self.q(t)], -1)

    def _invert(self, z1, z2, maxit=50):
        z1, z2 = np.broadcast_arrays(np.asarray(z1, float), np.asarray(z2, float))
        p = self.chi(z1, z2)
        t = z1.copy()
        s = z2 / np.maximum(self.q(np.clip(t, self.lo, self.hi))[..., 1], 1e-3)
        for _ in range(maxit):
            if np.any((t < self.lo) | (t > self.hi)):
                raise ConstructionError("ruled chart left the extended midline near "
                                        f"z = ({z1.flat[0]:.4g}, {z2.flat[0]:.4g})")
            r = self.phi(t, s) - p
            res = np.max(np.abs(r)) if r.size else 0.0
            if res <= self.newton_tol:
                return t, s
            J = self.dphi(t, s)
            d = np.linalg.solve(J, -r[..., None])[..., 0]
            t = t + d[..., 0]
            s = s + d[..., 1]
        r = np.abs(self.phi(t, s) - p).max(-1)
        k = np.unravel_index(np.argmax(r), r.shape)
        raise ConstructionError(f"ruled chart inversion failed at z = ({z1[k]:.4g}, {z2[k]:.4g}),"
                                f" residual {r[k]:.2e}")

    def k(self, t, s):
        R = self.r(t)
        q3 = np.concatenate([self.q(t), np.zeros(np.shape(t) + (1,))], -1)
        return self.r.position(t) + s[..., None] * np.einsum("...ij,...j->...i", R, q3)

    def value(self, z1, z2):
        t, s = self._invert(z1, z2)
        return self.k(t, s)

    def _chart(self, z1, z2):
        z1, z2 = np.broadcast_arrays(np.asarray(z1, float), np.asarray(z2, float))
        t, s = self._invert(z1, z2)
        M = np.linalg.solve(self.dphi(t, s), self.chi.jacobian(z1, z2))   # d(t,s)/dz
        return t, s, M

    def jacobian(self, z1, z2):
        t, s, M = self._chart(z1, z2)
        R = self.r(t)
        wv = self._wvec(t)
        e1 = np.zeros(np.shape(t) + (2,))
        e1[..., 0] = 1.0
        c1 = np.concatenate([e1 + s[..., None] * wv, np.zeros(np.shape(t) + (1,))], -1)
        c2 = np.concatenate([self.q(t), np.zeros(np.shape(t) + (1,))], -1)
        Dk = R @ np.stack([c1, c2], -1)
        return Dk @ M

    def normal(self, z1, z2):
        t, _, _ = self._chart(z1, z2)
        return self.r(t)[..., :, 2]

    def second_form(self, z1, z2):
        """Analytic: only d_tt k . nu = e1^T A (e1 + s w) is nonzero in the chart."""
        t, s, M = self._chart(z1, z2)
        A = self.A(t)
        wv = self._wvec(t)
        coef = A[..., 0, 0] + s * np.einsum("...j,...j->...", A[..., 0, :], wv)
        g = M[..., 0, :]
        return coef[..., None, None] * g[..., :, None] * g[..., None, :]


def ruled_isometry(geom, alpha=0.0, beta=0.0, w=0.01, **kw):
    return RuledIsometry(geom, alpha, beta, w, **kw)


class GridSurface(SurfaceImmersion):
    """Immersion known on a tensor grid, interpolated by bicubic splines."""

    def __init__(self, z1, z2, points):
        self.z1, self.z2, self.points = np.asarray(z1), np.asarray(z2), np.asarray(points)
        self._spl = [RectBivariateSpline(self.z1, self.z2, self.points[..., i], kx=3, ky=3)
                     for i in range(3)]

    def value(self, z1, z2):
        z1, z2 = np.broadcast_arrays(np.asarray(z1, float), np.asarray(z2, float))
        return np.stack([s.ev(z1, z2) for s in self._spl], -1)

    def jacobian(self, z1, z2):
        z1, z2 = np.broadcast_arrays(np.asarray(z1, float), np.asarray(z2, float))
        d1 = np.stack([s.ev(z1, z2, dx=1) for s in self._spl], -1)
        d2 = np.stack([s.ev(z1, z2, dy=1) for s in self._spl], -1)
        return np.stack([d1, d2], -1)

    def second_form(self, z1, z2):
        z1, z2 = np.broadcast_arrays(np.asarray(z1, float), np.asarray(z2, float))
        nu = self.normal(z1, z2)
        H = [np.stack([s.ev(z1, z2, dx=a, dy=b) for s in self._spl], -1)
             for a, b in ((2, 0), (1, 1), (0, 2))]
        l, m, n = (np.sum(h * nu, -1) for h in H)
        return sym2(np.stack([l, m, n], -1))


def _frame_generators(a_field, II_field, z1, z2):
    """Gamma_1, Gamma_2 (..., 3, 3) with d_j F = F Gamma_j for F = (f_1 | f_2 | nu)."""
    a = a_field(z1, z2)
    da = a_field.partials(z1, z2)
    II = II_field(z1, z2)
    ainv = np.linalg.inv(a)
    # Christoffel symbols Gam[k, i, j]
    Gam = np.zeros(np.shape(z1) + (2, 2, 2))
    for k in range(2):
        for i in range(2):
            for j in range(2):
                acc = 0.0
                for l in range(2):
                    acc = acc + 0.5 * ainv[..., k, l] * (da[i][..., l, j] + da[j][..., i, l]
                                                          - da[l][..., i, j])
                Gam[..., k, i, j] = acc
    W = ainv @ II                                   # shape operator a^{-1} II
    gens = []
    for j in range(2):
        G = np.zeros(np.shape(z1) + (3, 3))
        for i in range(2):
            G[..., 0, i] = Gam[..., 0, i, j]
            G[..., 1, i] = Gam[..., 1, i, j]
            G[..., 2, i] = II[..., i, j]
        G[..., 0, 2] = -W[..., 0, j]
        G[..., 1, 2] = -W[..., 1, j]
        gens.append(G)
    return gens


def _rk4_lines(F0, p0, gen_fn, s0, h, n, j):
    """Integrate d/ds (F, p) = (F Gamma_j, F e_j) from s0 over n steps of size h."""
    Fs, ps = [F0], [p0]
    F, p = F0, p0
    s = s0
    for _ in range(n):
        def rhs(Fc, sc):
            G = gen_fn(sc)
            return Fc @ G, Fc[..., :, j]
        k1F, k1p = rhs(F, s)
        k2F, k2p = rhs(F + 0.5 * h * k1F, s + 0.5 * h)
        k3F, k3p = rhs(F + 0.5 * h * k2F, s + 0.5 * h)
        k4F, k4p = rhs(F + h * k3F, s + h)
        F = F + h / 6 * (k1F + 2 * k2F + 2 * k3F + k4F)
        p = p + h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
        s = s + h
        Fs.append(F)
        ps.append(p)
    return np.stack(Fs), np.stack(ps)


def surface_from_forms(a_field, II_field, box=(0.0, 1.0, -0.5, 0.5), n=(65, 65), origin=None):
    """Integrate the moving-frame system on a rectangle along two path orders.

    Returns (GridSurface from the x1-then-x2 order, path-dependence residual).
    The residual is the max difference in position and frame between the
    two orders over the grid; it vanishes (up to RK4 error) iff the forms
    satisfy Gauss-Codazzi on the patch.
    """
    a1, b1, a2, b2 = box
    n1, n2 = n
    z1 = np.linspace(a1, b1, n1)
    z2 = np.linspace(a2, b2, n2)
    h1, h2 = z1[1] - z1[0], z2[1] - z2[0]
    A0 = a_field(np.array(a1), np.array(a2))
    c = np.linalg.cholesky(A0)        # a = c c^T, tangent frame coordinates = c^T
    F0 = np.eye(3)
    F0[:2, :2] = c.T
    p0 = np.zeros(3) if origin is None else np.asarray(origin, float)

    def gen_along_1(z2v):
        return lambda s: _frame_generators(a_field, II_field, np.full(np.shape(z2v), s), z2v)[0]

    def gen_along_2(z1v):
        return lambda s: _frame_generators(a_field, II_field, z1v, np.full(np.shape(z1v), s))[1]

    # order A: along z1 at z2 = a2, then along z2
    FA, pA = _rk4_lines(F0, p0, gen_along_1(np.array(a2)), a1, h1, n1 - 1, 0)
    FA2, pA2 = _rk4_lines(FA, pA, gen_along_2(z1), a2, h2, n2 - 1, 1)   # (n2, n1, ...)
    # order B: along z2 at z1 = a1, then along z1
    FB, pB = _rk4_lines(F0, p0, gen_along_2(np.array(a1)), a2, h2, n2 - 1, 1)
    FB2, pB2 = _rk4_lines(FB, pB, gen_along_1(z2), a1, h1, n1 - 1, 0)   # (n1, n2, ...)
    PA = np.swapaxes(pA2, 0, 1)
    PB = pB2
    FAt = np.swapaxes(FA2, 0, 1)
    resid = max(np.max(np.abs(PA - PB)), np.max(np.abs(FAt - FB2)))
    return GridSurface(z1, z2, PA), float(resid)


# ---------------------------------------------------------------- rescaled Gauss-Codazzi

class StripField:
    """Symmetric 2x2 field of rescaled coordinates (x1, x2) with partials."""

    def __init__(self, value, partials=None, label=""):
        self._v, self._p, self.label = value, partials, label
        self.energy = None
        self.predicted = None

    def __call__(self, x1, x2):
        x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
        return self._v(x1, x2)

    def partials(self, x1, x2):
        x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
        if self._p is not None:
            return self._p(x1, x2)
        h = 1e-4
        f = self.__call__
        d1 = (-f(x1 + 2 * h, x2) + 8 * f(x1 + h, x2) - 8 * f(x1 - h, x2) + f(x1 - 2 * h, x2)) / (12 * h)
        d2 = (-f(x1, x2 + 2 * h) + 8 * f(x1, x2 + h) - 8 * f(x1, x2 - h) + f(x1, x2 - 2 * h)) / (12 * h)
        return d1, d2


def immersion_strip_field(surface, w):
    """Rescaled second form II_v(x1, w x2) of a constructed immersion."""
    return StripField(lambda x1, x2: surface.second_form(x1, w * x2), label="immersion")


def gc_residual(geom, w, field, x1, x2):
    """det and rescaled Codazzi residuals of a strip field at points (x1, x2).

    Flat metric a = diag((1 - k w x2)^2, 1).
    """
    x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
    II = field(x1, x2)
    d1, d2 = field.partials(x1, x2)
    L, M, N = II[..., 0, 0], II[..., 0, 1], II[..., 1, 1]
    k = geom.kappa(x1)
    dk = geom.kappa.d1(x1)
    rho = 1.0 - k * w * x2
    gc1 = (rho * (d2[..., 0, 0] / w - d1[..., 0, 1]) + k * L - dk * w * x2 * M
           + k * rho ** 2 * N)
    gc2 = rho * (d2[..., 0, 1] / w - d1[..., 1, 1]) - k * M
    return L * N - M * M, np.stack([gc1, gc2], -1)


def _ansatz_d(w, delta, kappa, n):
    dd = delta * delta + 1.0

    def parts(x1, x2):
        rho = 1.0 - kappa * w * x2
        S = np.sqrt(dd * rho ** 2 - 1.0)
        return rho, S

    def value(x1, x2):
        rho, S = parts(x1, x2)
        return delta * n * sym2(np.stack([S, 1 / rho, 1 / (rho ** 2 * S)], -1))

    def partials(x1, x2):
        rho, S = parts(x1, x2)
        r2 = -kappa * w
        S2 = dd * rho * r2 / S
        dL = delta * n * S2
        dM = -delta * n * r2 / rho ** 2
        dN = -delta * n * (2 * rho * r2 * S + rho ** 2 * S2) / (rho ** 4 * S ** 2)
        z = np.zeros_like(rho)
        return sym2(np.stack([z, z, z], -1)), sym2(np.stack([dL, dM, dN], -1))

    return value, partials


def _ansatz_b(w):
    sw = np.sqrt(w)
    K = np.array([[w, sw], [sw, 1.0]])

    def value(x1, x2):
        return (x1 + sw * x2)[..., None, None] * K

    def partials(x1, x2):
        one = np.ones(np.shape(x1))
        return one[..., None, None] * K, (sw * one)[..., None, None] * K

    return value, partials


def delta_threshold(kappa, w):
    kw = kappa * w
    return np.sqrt(kw) * np.sqrt(4 - kw) / (2 - kw)


def ansatz_field(which, w, delta=None, geom=None, kappa=None, n=None, moduli=None,
                 with_energy=True):
    """Closed-form rescaled second forms for the (d) and (b) reference geometries."""
    from .geometry import preset
    from .limit_energies import plate_energy
    if which == "d":
        geom = geom or preset("arc_twist", kappa=kappa or 1.0, n=n or 1.0)
        kappa = geom.params.get("kappa", 1.0) if kappa is None else kappa
        n = geom.params.get("n", 1.0) if n is None else n
        delta = (kappa * w) ** (1.0 / 3.0) if delta is None else float(delta)
        thr = delta_threshold(kappa, w)
        if not delta > thr:
            raise DomainError(f"delta must exceed (k w)^(1/2) (4 - k w)^(1/2) / (2 - k w) "
                              f"= {thr:.6g}; got {delta:.6g}")
        v, p = _ansatz_d(w, delta, kappa, n)
        f = StripField(v, p, label=f"ansatz-d(w={w}, delta={delta:.4g})")
        f.delta = delta
        f.predicted = kappa ** (2 / 3) * n ** 2 * w ** (2 / 3)
    elif which == "b":
        geom = geom or preset("ramp")
        v, p = _ansatz_b(w)
        f = StripField(v, p, label=f"ansatz-b(w={w})")
        f.predicted = w
    else:
        raise ValueError(f"unknown ansatz {which!r}")
    f.geom = geom
    if with_energy:
        f.energy = plate_energy(geom, w, f, moduli=moduli)
    return f


def strip_metric_field(geom):
    """Flat strip metric diag((1 - k z2)^2, 1) with its partials."""
    def value(z1, z2):
        rho = 1.0 - geom.kappa(z1) * z2
        z = np.zeros_like(rho)
        return sym2(np.stack([rho ** 2, z, z + 1.0], -1))

    def partials(z1, z2):
        k, dk = geom.kappa(z1), geom.kappa.d1(z1)
        rho = 1.0 - k * z2
        z = np.zeros_like(rho)
        return (sym2(np.stack([-2 * rho * dk * z2, z, z], -1)),
                sym2(np.stack([-2 * rho * k, z, z], -1)))

    return StripField(value, partials, label="strip metric")


def field_surface(geom, w, field, n=(81, 17)):
    """Integrate a strip field of rescaled second forms into a surface of width w."""
    def value(z1, z2):
        return field(z1, z2 / w)

    def partials(z1, z2):
        d1, d2 = field.partials(z1, z2 / w)
        return d1, d2 / w

    II = StripField(value, partials, label=field.label)
    return surface_from_forms(strip_metric_field(geom), II, box=(0.0, geom.L, -w / 2, w / 2),
                              n=n)

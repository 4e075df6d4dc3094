"""Limit energies of narrow and wide ribbons and their pointwise minimizations."""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .errors import DomainError
from .fields import as_field, sym2
from .geometry import (build_euclidean_ribbon, codazzi_deficit, gauss_deficit,
                       gauss_deficit_1)
from .quadratic_forms import (DET_FORM, IsotropicModuli, alpha_pm, plate_form, q1, q2_circ,
                              q3_at_identity, relax_to_2x2)
from .quadrature import composite_gauss, gauss_legendre


@dataclass
class MidlineState:
    alpha: object = 0.0
    beta: object = 0.0
    gammabar: object = 0.0

    def matrix(self, x1):
        a, b, c = (as_field(f)(x1) for f in (self.alpha, self.beta, self.gammabar))
        return sym2(np.stack([a, b, c], axis=-1))


def _q3(moduli, q3):
    return q3 if q3 is not None else q3_at_identity(moduli or IsotropicModuli())


@dataclass
class MidlineForms:
    """Relaxed forms sampled at the midline quadrature nodes."""
    x: np.ndarray
    weights: np.ndarray
    L: float
    q2: object
    ribbon: object

    def mean(self, vals):
        return float(np.dot(vals, self.weights) / self.L)


def midline_forms(geom, moduli=None, q3=None, panels=64, order=5, ribbon=None):
    x, wts = composite_gauss(0.0, geom.L, panels, order)
    ribbon = build_euclidean_ribbon(geom) if ribbon is None else ribbon
    q2, _ = relax_to_2x2(_q3(moduli, q3), ribbon.Q0(x))
    return MidlineForms(x, wts, geom.L, q2, ribbon)


def e0_gauss(geom, moduli=None, state=None, q3=None, forms=None):
    f = forms or midline_forms(geom, moduli, q3)
    state = state or MidlineState()
    bend = f.mean(f.q2(state.matrix(f.x)))
    q1v, _ = q1(f.q2)
    dG = gauss_deficit(geom, f.x)
    return bend / 12.0 + f.mean(q1v * dG ** 2) / 720.0


def e0_codazzi(geom, moduli=None, state=None, q3=None, forms=None, tol=1e-10):
    f = forms or midline_forms(geom, moduli, q3)
    dG = gauss_deficit(geom, f.x)
    if np.max(np.abs(dG)) > tol:
        raise DomainError("Codazzi limit undefined on Gauss-incompatible input")
    state = state or MidlineState()
    bend = f.mean(f.q2(state.matrix(f.x)))
    dC = codazzi_deficit(geom, f.x)
    qc, _ = q2_circ(f.q2, dC[..., 0], dC[..., 1])
    return bend / 12.0 + f.mean(qc) / 144.0


def plate_energy(geom, w, II_field, moduli=None, q3=None, panels=64, order=5, n2=16,
                 ribbon=None):
    """(1/12) mean over S of Q_w(x', II_field - II^w)."""
    x1, w1 = composite_gauss(0.0, geom.L, panels, order)
    x2, w2 = gauss_legendre(n2, -0.5, 0.5)
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    W = np.outer(w1, w2)
    ribbon = build_euclidean_ribbon(geom) if ribbon is None else ribbon
    qw = plate_form(geom, w, X1, X2, q3=_q3(moduli, q3), ribbon=ribbon)
    diff = np.asarray(II_field(X1, X2)) - geom.second_form(X1, w * X2)
    return float(np.sum(qw(diff) * W) / geom.L) / 12.0


def _as_matrix_field(m):
    if callable(m):
        return m
    M = np.asarray(m, dtype=float)
    return lambda x: np.broadcast_to(M, np.shape(x) + (2, 2))


def j_density(q2, ap, am, M, II0):
    d = np.linalg.det(M)
    return q2(M - II0) + ap * np.maximum(d, 0) + am * np.maximum(-d, 0)


def wide_j(geom, m, moduli=None, q3=None, forms=None):
    if not geom.flat:
        raise DomainError("wide-ribbon functional defined for flat mid-surfaces")
    f = forms or midline_forms(geom, moduli, q3)
    ap, am = alpha_pm(f.q2)
    M = _as_matrix_field(m)(f.x)
    return f.mean(j_density(f.q2, ap, am, M, geom.II0(f.x))) / 12.0


# ---------------------------------------------------------------- pointwise min of J

def _coords(M):
    return np.array([M[0, 0], 0.5 * (M[0, 1] + M[1, 0]), M[1, 1]])


def _mat(v):
    return np.array([[v[0], v[1]], [v[1], v[2]]])


def _f(v, Q, ap, am, v0):
    d = v @ DET_FORM @ v
    r = v - v0
    return r @ Q @ r + ap * max(d, 0.0) + am * max(-d, 0.0)


def _stationary_branch(Q, alpha, sign, v0, rtol=1e-8):
    """Minimizer of Q(v - v0) + sign alpha det v on {sign det >= 0}, or None."""
    H = Q + sign * alpha * DET_FORM
    lam, V = np.linalg.eigh(H)
    cut = rtol * np.max(np.abs(lam))
    rng = lam > cut
    rhs = Q @ v0
    N = V[:, ~rng]
    if N.shape[1] and np.max(np.abs(N.T @ rhs)) > 1e-7 * (np.linalg.norm(rhs) + 1e-300):
        return None
    vp = V[:, rng] @ ((V[:, rng].T @ rhs) / lam[rng])

    def sdet(v):
        return sign * (v @ DET_FORM @ v)

    if sdet(vp) >= -1e-14:
        return vp
    if N.shape[1] == 0:
        return None
    # search the affine minimizer set for a point with the right det sign
    A = N.T @ DET_FORM @ N * sign
    bvec = N.T @ DET_FORM @ vp * sign
    mu, U = np.linalg.eigh(np.atleast_2d(A))
    if mu[-1] > 1e-12:
        u = N @ U[:, -1]
        for s in np.geomspace(1e-3, 1e3, 61):
            for sg in (1, -1):
                v = vp + sg * s * u
                if sdet(v) >= 0:
                    return v
    if mu[-1] < -1e-12:
        y = -np.linalg.solve(np.atleast_2d(A), bvec)
        v = vp + N @ y
        if sdet(v) >= -1e-14:
            return v
    return None


def _detzero_branch(Q, v0):
    """Best rank-<=1 symmetric matrix s u u^T (exact in s, 1D search in angle)."""
    def val(phi):
        c, s = np.cos(phi), np.sin(phi)
        wv = np.array([c * c, c * s, s * s])
        den = wv @ Q @ wv
        num = wv @ Q @ v0
        return v0 @ Q @ v0 - num * num / den, num / den * wv

    grid = np.linspace(0.0, np.pi, 721)
    vals = np.array([val(p)[0] for p in grid])
    k = int(np.argmin(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = minimize_scalar(lambda p: val(p)[0], bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    best = res.x if res.fun < vals[k] else grid[k]
    return val(best)[1]


@dataclass
class PointwiseMin:
    value: float
    M: np.ndarray
    branch: str
    candidates: list = field(default_factory=list)


def pointwise_min_j(Q, ap, am, II0, tie=1e-10):
    v0 = _coords(np.asarray(II0, float))
    cands = []
    for name, alpha, sign in (("plus", ap, 1.0), ("minus", am, -1.0)):
        v = _stationary_branch(Q, alpha, sign, v0)
        if v is not None:
            cands.append((_f(v, Q, ap, am, v0), name, v))
    vz = _detzero_branch(Q, v0)
    cands.append((_f(vz, Q, ap, am, v0), "detzero", vz))
    best = min(c[0] for c in cands)
    close = [c for c in cands if c[0] <= best + tie]
    pick = next((c for c in close if c[1] == "detzero"), close[0])
    # safeguarded direct search from the chosen candidate
    res = minimize(lambda v: _f(v, Q, ap, am, v0), pick[2], method="Nelder-Mead",
                   options={"xatol": 1e-11, "fatol": 1e-14, "maxiter": 4000})
    if res.fun < pick[0] - 1e-8 * max(1.0, abs(pick[0])):
        warnings.warn("min_j branch solution improved by direct search")
        pick = (float(res.fun), "direct", res.x)
        close = [pick]
    return PointwiseMin(float(pick[0]), _mat(pick[2]), pick[1],
                        [(float(c[0]), c[1], _mat(c[2])) for c in close])


@dataclass
class MinJResult:
    value: float
    x: np.ndarray
    M: np.ndarray
    f: np.ndarray
    branches: list
    kappa1: np.ndarray


def min_j(geom, moduli=None, q3=None, forms=None):
    if not geom.flat:
        raise DomainError("wide-ribbon functional defined for flat mid-surfaces")
    f = forms or midline_forms(geom, moduli, q3)
    ap, am = alpha_pm(f.q2)
    ap, am = np.broadcast_to(ap, f.x.shape), np.broadcast_to(am, f.x.shape)
    Qs = np.broadcast_to(f.q2.matrix, f.x.shape + (3, 3))
    II0 = geom.II0(f.x)
    Ms, vals, branches = [], [], []
    cache = {}
    for i in range(len(f.x)):
        key = (np.round(Qs[i], 11).tobytes(), round(float(ap[i]), 9), round(float(am[i]), 9),
               np.round(II0[i], 12).tobytes())
        if key not in cache:
            cache[key] = pointwise_min_j(Qs[i], ap[i], am[i], II0[i])
        r = cache[key]
        Ms.append(r.M)
        vals.append(r.value)
        branches.append(r.branch)
    vals = np.array(vals)
    ev = np.linalg.eigvalsh(II0)
    k1 = np.min(np.abs(ev), axis=-1)
    return MinJResult(f.mean(vals) / 12.0, f.x, np.array(Ms), vals, branches, k1)


# ---------------------------------------------------------------- Codazzi wide scale

def _check_l0(geom, x1, margin=1e-8):
    l0 = geom.II0(x1)[..., 0, 0]
    if np.any(np.abs(l0) <= margin):
        raise DomainError("l0 vanishes: the construction needs II0_11 != 0 along the midline")
    return l0


def make_b0(geom, alpha, beta, x1):
    x1 = np.asarray(x1, dtype=float)
    l0 = _check_l0(geom, x1)
    II0 = geom.II0(x1)
    m0, n0 = II0[..., 0, 1], II0[..., 1, 1]
    a, b = as_field(alpha)(x1), as_field(beta)(x1)
    return sym2(np.stack([a, b, (2 * m0 * b - n0 * a) / l0], axis=-1))


def make_b1(geom, x1):
    x1 = np.asarray(x1, dtype=float)
    l0 = _check_l0(geom, x1)
    II0 = geom.II0(x1)
    m0, n0 = II0[..., 0, 1], II0[..., 1, 1]
    dC = codazzi_deficit(geom, x1)
    g1 = gauss_deficit_1(geom, x1)
    c22 = (g1 - n0 * dC[..., 0] + 2 * m0 * dC[..., 1]) / l0
    return -sym2(np.stack([dC[..., 0], dC[..., 1], c22], axis=-1))


def codazzi_i(geom, alpha=0.0, beta=0.0, moduli=None, q3=None, forms=None):
    f = forms or midline_forms(geom, moduli, q3)
    B0 = make_b0(geom, alpha, beta, f.x)
    B1 = make_b1(geom, f.x)
    return f.mean(f.q2(B0)) / 12.0 + f.mean(f.q2(B1)) / 144.0


def codazzi_surrogate(geom, forms=None, panels=64, order=5):
    x, wts = (forms.x, forms.weights) if forms else composite_gauss(0, geom.L, panels, order)
    II0 = geom.II0(x)
    m0, n0 = II0[..., 0, 1], II0[..., 1, 1]
    dC = codazzi_deficit(geom, x)
    g1 = gauss_deficit_1(geom, x)
    r = g1 - n0 * dC[..., 0] + 2 * m0 * dC[..., 1]
    return float(np.dot(np.sum(dC ** 2, -1) + r ** 2, wts) / geom.L)

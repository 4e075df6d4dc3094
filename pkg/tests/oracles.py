"""Independent reference computations used by the tests.

These avoid the library's Schur-complement and branch logic: dense sampling
of the free variables followed by local refinement with a generic optimizer.
"""

import itertools

import numpy as np
from scipy.optimize import minimize


def grid_then_refine(fun, dim, half_width=3.0, per_axis=9, keep=4, batch=None):
    """Minimize `fun` over R^dim: tensor-grid scan, then BFGS/Nelder-Mead polish."""
    axis = np.linspace(-half_width, half_width, per_axis)
    pts = np.array(list(itertools.product(axis, repeat=dim)))
    vals = batch(pts) if batch is not None else np.array([fun(p) for p in pts])
    best = None
    for k in np.argsort(vals)[:keep]:
        r = minimize(fun, pts[k], method="BFGS", options={"gtol": 1e-12})
        r = minimize(fun, r.x, method="Nelder-Mead",
                     options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": 20000})
        if best is None or r.fun < best.fun:
            best = r
    return best.fun, best.x


def q3_isotropic(B, mu=1.0, lam=0.0):
    S = 0.5 * (B + np.swapaxes(B, -1, -2))
    return 2 * mu * np.sum(S * S, axis=(-2, -1)) + lam * np.trace(S, axis1=-2, axis2=-1) ** 2


def q2_oracle(A, q3=q3_isotropic, frame=None):
    """min over the 5 free entries of B with upper block A of Q3(R B R^T)."""
    R = np.eye(3) if frame is None else frame

    def build(u):
        u = np.atleast_2d(u)
        B = np.zeros((len(u), 3, 3))
        B[:, :2, :2] = A
        B[:, 0, 2], B[:, 1, 2], B[:, 2, 0], B[:, 2, 1], B[:, 2, 2] = u.T
        return R @ B @ R.T

    f = lambda u: float(q3(build(u))[0])
    return grid_then_refine(f, 5, per_axis=5, batch=lambda P: q3(build(P)))


def jdensity_oracle(II0, ap, am, q2):
    """Brute-force min over symmetric M of Q2(M - II0) + a+ det+ + a- det-."""
    def f(v):
        M = np.array([[v[0], v[1]], [v[1], v[2]]])
        d = np.linalg.det(M)
        return float(q2(M - II0)) + ap * max(d, 0.0) + am * max(-d, 0.0)

    def batch(P):
        M = np.stack([np.stack([P[:, 0], P[:, 1]], -1), np.stack([P[:, 1], P[:, 2]], -1)], -2)
        d = np.linalg.det(M)
        return q2(M - II0) + ap * np.maximum(d, 0) + am * np.maximum(-d, 0)

    return grid_then_refine(f, 3, half_width=2.0 * (1 + np.abs(II0).max()), per_axis=25,
                            keep=3, batch=batch)


def central_gradient(fun, x, idx, h):
    """Central difference of scalar `fun` with respect to x[idx]."""
    xp, xm = x.copy(), x.copy()
    xp[idx] += h
    xm[idx] -= h
    return (fun(xp) - fun(xm)) / (2 * h)

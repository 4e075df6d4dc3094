"""Quasi-Newton minimization wrapper with a monotone energy trace."""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize as _sp_minimize


@dataclass
class MinimizeResult:
    x: np.ndarray
    energy: float
    trace: list
    converged: bool
    iterations: int
    message: str = ""
    info: dict = field(default_factory=dict)


def minimize(objective, x0, gtol=1e-9, maxiter=5000, memory=20, scale=None):
    """L-BFGS with backtracking (scipy L-BFGS-B, no bounds).

    `objective(x)` returns (energy, gradient) for a flat or shaped array.
    The problem is normalized by `scale` (default: initial energy) so that
    `gtol` is the inf-norm tolerance relative to that scale.  On line-search
    failure the best iterate is returned with `converged=False`.
    """
    x0 = np.asarray(x0, dtype=float)
    shape = x0.shape
    e0, g0 = objective(x0)
    if not np.isfinite(e0):
        raise ValueError("objective not finite at the initial point")
    s = float(scale) if scale is not None else max(abs(e0), 1e-300)
    best = {"x": x0.ravel().copy(), "e": float(e0)}
    trace = [float(e0)]

    def fun(v):
        e, g = objective(v.reshape(shape))
        if e < best["e"]:
            best["e"], best["x"] = float(e), v.copy()
        return e / s, np.asarray(g, float).ravel() / s

    def cb(v):
        trace.append(best["e"])

    if np.max(np.abs(g0)) / s <= gtol:
        return MinimizeResult(x0.copy(), float(e0), trace, True, 0, "initial point stationary")
    res = _sp_minimize(fun, x0.ravel(), jac=True, method="L-BFGS-B", callback=cb,
                       options={"maxiter": maxiter, "maxcor": memory, "gtol": gtol,
                                "ftol": 0.0, "maxls": 40, "maxfun": 4 * maxiter})
    # trace of accepted iterates is non-increasing by construction of best
    x = best["x"].reshape(shape)
    gnorm = float(np.max(np.abs(res.jac))) if res.jac is not None else np.inf
    ok = bool(res.success) and gnorm <= gtol
    msg = res.message if isinstance(res.message, str) else res.message.decode()
    return MinimizeResult(x, best["e"], trace, ok, int(res.nit), msg,
                          {"gnorm_scaled": gnorm, "nfev": int(res.nfev), "scale": s})

"""Rotation-valued paths: Magnus (order 4) Lie-group integration on SO(2)/SO(3)."""

import numpy as np

_C1 = 0.5 - np.sqrt(3.0) / 6.0
_C2 = 0.5 + np.sqrt(3.0) / 6.0
_MAG = np.sqrt(3.0) / 12.0


def hat(v):
    """(..., 3) -> (..., 3, 3) skew matrix with hat(v) @ x = v x x."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def expm_skew(W):
    """Exponential of a batch of skew matrices (2x2 or 3x3), closed form."""
    W = np.asarray(W, dtype=float)
    d = W.shape[-1]
    if d == 2:
        th = 0.5 * (W[..., 1, 0] - W[..., 0, 1])
        c, s = np.cos(th), np.sin(th)
        out = np.empty(W.shape)
        out[..., 0, 0] = c
        out[..., 0, 1] = -s
        out[..., 1, 0] = s
        out[..., 1, 1] = c
        return out
    om = 0.5 * np.stack([W[..., 2, 1] - W[..., 1, 2],
                         W[..., 0, 2] - W[..., 2, 0],
                         W[..., 1, 0] - W[..., 0, 1]], axis=-1)
    th2 = np.sum(om * om, axis=-1)
    th = np.sqrt(th2)
    small = th < 1e-4
    ths = np.where(small, 1.0, th)
    a = np.where(small, 1.0 - th2 / 6.0 + th2 ** 2 / 120.0, np.sin(ths) / ths)
    b = np.where(small, 0.5 - th2 / 24.0 + th2 ** 2 / 720.0,
                 (1.0 - np.cos(ths)) / ths ** 2)
    K = hat(om)
    return np.eye(3) + a[..., None, None] * K + b[..., None, None] * (K @ K)


def magnus_increment(generator, s, h):
    """Two-stage Magnus increment for R' = R A(s) over [s, s + h]."""
    s = np.asarray(s, dtype=float)
    h = np.asarray(h, dtype=float)
    A1 = generator(s + _C1 * h)
    A2 = generator(s + _C2 * h)
    hh = h[..., None, None]
    return 0.5 * hh * (A1 + A2) + _MAG * hh ** 2 * (A1 @ A2 - A2 @ A1)


def project_rotation(R):
    """Nearest rotation (polar factor) of a batch of matrices."""
    U, _, Vt = np.linalg.svd(R)
    Q = U @ Vt
    flip = np.linalg.det(Q) < 0
    if np.any(flip):
        U = U.copy()
        U[flip, :, -1] *= -1
        Q = U @ Vt
    return Q


class FramePath:
    """Solution of R' = R A(s) on [a, b] with R(anchor) = R0.

    Samples live on a grid through `anchor`; between samples the path is
    re-integrated from the left sample with one partial Magnus step, so the
    dense output keeps the integrator's accuracy.  Optionally integrates the
    curve position p' = speed(s) R(s) e1 alongside (2-point Gauss per step).
    """

    def __init__(self, generator, a, b, R0=None, anchor=0.0, h_max=2e-3,
                 speed=None, origin=None):
        if not a <= anchor <= b:
            raise ValueError(f"anchor {anchor} outside [{a}, {b}]")
        self.generator = generator
        self.speed = speed
        probe = np.asarray(generator(np.array([anchor])))
        self.dim = probe.shape[-1]
        R0 = np.eye(self.dim) if R0 is None else np.asarray(R0, dtype=float)
        nl = int(np.ceil((anchor - a) / h_max)) if anchor > a else 0
        nr = int(np.ceil((b - anchor) / h_max)) if b > anchor else 0
        left = np.linspace(a, anchor, nl + 1)[:-1] if nl else np.empty(0)
        right = np.linspace(anchor, b, nr + 1)
        self.nodes = np.concatenate([left, right])
        self.a, self.b, self.anchor = float(a), float(b), float(anchor)
        ia = nl
        h = np.diff(self.nodes)
        E = expm_skew(magnus_increment(generator, self.nodes[:-1], h))
        n = len(self.nodes)
        R = np.empty((n, self.dim, self.dim))
        R[ia] = R0
        for k in range(ia, n - 1):
            Rk = R[k] @ E[k]
            R[k + 1] = 1.5 * Rk - 0.5 * Rk @ Rk.T @ Rk
        for k in range(ia - 1, -1, -1):
            Rk = R[k + 1] @ E[k].T
            R[k] = 1.5 * Rk - 0.5 * Rk @ Rk.T @ Rk
        self.samples = R
        # curve position by Gauss quadrature on each interval
        origin = np.zeros(self.dim) if origin is None else np.asarray(origin, float)
        incr = self._interval_integral(np.arange(n - 1), h)
        pos = np.zeros((n, self.dim))
        pos[ia + 1:] = np.cumsum(incr[ia:], axis=0)
        if ia:
            pos[:ia] = -np.cumsum(incr[:ia][::-1], axis=0)[::-1]
        self.positions = pos + origin

    def _speed(self, s):
        return np.ones_like(s) if self.speed is None else np.asarray(self.speed(s), float)

    def _interval_integral(self, k, h):
        """Integral of speed * R e1 over [nodes[k], nodes[k] + h]."""
        s0 = self.nodes[k]
        out = 0.0
        for c in (_C1, _C2):
            Rc = self.samples[k] @ expm_skew(magnus_increment(self.generator, s0, c * h))
            out = out + 0.5 * h[..., None] * Rc[..., :, 0] * self._speed(s0 + c * h)[..., None]
        return out

    def _locate(self, s):
        s = np.asarray(s, dtype=float)
        tol = 1e-10 * max(1.0, self.b - self.a)
        if np.any(s < self.a - tol) or np.any(s > self.b + tol):
            bad = s[(s < self.a - tol) | (s > self.b + tol)].ravel()[0]
            raise ValueError(f"frame path queried at s={bad} outside [{self.a}, {self.b}]")
        k = np.clip(np.searchsorted(self.nodes, s, side="right") - 1, 0, len(self.nodes) - 2)
        return k, s - self.nodes[k]

    def __call__(self, s):
        k, d = self._locate(s)
        return self.samples[k] @ expm_skew(magnus_increment(self.generator, self.nodes[k], d))

    def position(self, s):
        k, d = self._locate(s)
        return self.positions[k] + self._interval_integral(k, d)

    def orthogonality_drift(self):
        eye = np.eye(self.dim)
        RtR = np.einsum("kji,kjl->kil", self.samples, self.samples)
        return float(np.max(np.abs(RtR - eye)))

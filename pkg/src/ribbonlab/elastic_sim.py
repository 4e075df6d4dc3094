"""Full rescaled 3D energy and the reduced Kirchhoff shell energy."""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, GeometryError
from .geometry import build_euclidean_ribbon, metric_at, midsurface_metric
from .quadratic_forms import IsotropicModuli, density_piola, density_w
from .quadrature import composite_gauss, gauss_legendre


# ---------------------------------------------------------------- reference factor

def reference_factor(ribbon, x, t, w, check=True):
    """M(x) = (grad_t Psi_t)^{-1} g~_t^{-1/2}; energy density is W(grad_t u M)."""
    z = ribbon.z_of_x(x, t, w)
    D = ribbon.dpsi(z)
    det = np.linalg.det(D)
    if np.any(np.abs(det) < 1e-12):
        raise GeometryError("singular grad_t Psi_t at a quadrature point")
    Dinv = np.linalg.inv(D)
    g = metric_at(ribbon.geom, z, check=check)
    gt = np.swapaxes(Dinv, -1, -2) @ g @ Dinv
    lam, V = np.linalg.eigh(gt)
    isq = (V / np.sqrt(lam)[..., None, :]) @ np.swapaxes(V, -1, -2)
    return Dinv @ isq


@dataclass
class Grid3:
    n1: int
    n2: int
    n3: int
    L: float = 1.0

    def __post_init__(self):
        if self.n1 < 4 or self.n2 < 2 or self.n3 < 2:
            raise ValueError("Grid3 needs n1 >= 4, n2 >= 2, n3 >= 2")

    @property
    def axes(self):
        return (np.linspace(0, self.L, self.n1), np.linspace(-0.5, 0.5, self.n2),
                np.linspace(-0.5, 0.5, self.n3))

    @property
    def spacing(self):
        return (self.L / (self.n1 - 1), 1.0 / (self.n2 - 1), 1.0 / (self.n3 - 1))

    @property
    def shape(self):
        return (self.n1, self.n2, self.n3)

    def nodes(self):
        a = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(a, -1)


@dataclass
class Config3:
    grid: Grid3
    u: np.ndarray          # (n1, n2, n3, 3)

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        if self.u.shape != self.grid.shape + (3,):
            raise ValueError(f"nodal array shape {self.u.shape} != {self.grid.shape + (3,)}")
        if not np.all(np.isfinite(self.u)):
            raise ValueError("non-finite nodal positions")


class _TrilinearOps:
    """Sparse maps from nodal values to d/dx_i at the 2x2x2 Gauss points of every cell."""

    def __init__(self, grid):
        n1, n2, n3 = grid.shape
        h = grid.spacing
        g = 0.5 - np.sqrt(3) / 6, 0.5 + np.sqrt(3) / 6
        cells = np.stack(np.meshgrid(np.arange(n1 - 1), np.arange(n2 - 1), np.arange(n3 - 1),
                                     indexing="ij"), -1).reshape(-1, 3)
        data = {0: [], 1: [], 2: []}
        rix, cix = [], []
        nid = lambda i, j, k: (i * n2 + j) * n3 + k
        qx = []
        for a in g:
            for b in g:
                for c in g:
                    loc = np.array([a, b, c])
                    qx.append(loc)
        qx = np.array(qx)                                   # (8, 3)
        nq = len(cells) * 8
        for corner in np.ndindex(2, 2, 2):
            cr = np.array(corner)
            # shape function value/derivatives at the 8 local points
            fac = np.where(cr == 1, qx, 1 - qx)             # (8, 3)
            dfac = np.where(cr == 1, 1.0, -1.0)
            for d in range(3):
                other = [e for e in range(3) if e != d]
                dv = dfac[d] / h[d] * fac[:, other[0]] * fac[:, other[1]]
                data[d].append(np.tile(dv, len(cells)))
            node = nid(cells[:, 0] + cr[0], cells[:, 1] + cr[1], cells[:, 2] + cr[2])
            cix.append(np.repeat(node, 8))
            rix.append(np.arange(nq))
        rix = np.concatenate(rix)
        cix = np.concatenate(cix)
        N = n1 * n2 * n3
        self.D = [sp.csr_matrix((np.concatenate(data[d]), (rix, cix)), shape=(nq, N))
                  for d in range(3)]
        ax = grid.axes
        origin = np.stack([ax[0][cells[:, 0]], ax[1][cells[:, 1]], ax[2][cells[:, 2]]], -1)
        self.points = (origin[:, None, :] + qx[None] * np.array(h)).reshape(-1, 3)
        self.weights = np.full(nq, np.prod(h) / 8.0)
        self.volume = grid.L


_OPS_CACHE = {}


def _ops(grid):
    key = (grid.n1, grid.n2, grid.n3, grid.L)
    if key not in _OPS_CACHE:
        _OPS_CACHE[key] = _TrilinearOps(grid)
    return _OPS_CACHE[key]


def _analytic_points(L, panels=32, order=4, n2=6, n3=4):
    x1, w1 = composite_gauss(0.0, L, panels, order)
    x2, w2 = gauss_legendre(n2, -0.5, 0.5)
    x3, w3 = gauss_legendre(n3, -0.5, 0.5)
    X = np.stack(np.meshgrid(x1, x2, x3, indexing="ij"), -1).reshape(-1, 3)
    W = (w1[:, None, None] * w2[None, :, None] * w3[None, None, :]).ravel()
    return X, W


def energy3d(geom, moduli, t, w, u, gradient=False, ribbon=None, quad=None):
    """Mean over U of W(grad_t u (grad_t Psi_t)^{-1} g~_t^{-1/2}).

    `u` is a Config3 (trilinear elements, 2x2x2 Gauss, optional analytic
    gradient) or anything with `grad_t(x)` (tensor Gauss quadrature).
    """
    moduli = moduli or IsotropicModuli()
    ribbon = ribbon or build_euclidean_ribbon(geom, t, w)
    if isinstance(u, Config3):
        ops = _ops(u.grid)
        M = reference_factor(ribbon, ops.points, t, w)
        U = u.u.reshape(-1, 3)
        Gx = np.stack([D @ U for D in ops.D], -1)            # (nq, 3, 3) d u_i / dx_d
        scale = np.array([1.0, 1.0 / w, 1.0 / t])
        F = (Gx * scale) @ M
        e = float(np.dot(density_w(moduli, F), ops.weights) / ops.volume)
        if not gradient:
            return e
        P = density_piola(moduli, F)
        dGx = (P @ np.swapaxes(M, -1, -2)) * scale * (ops.weights / ops.volume)[:, None, None]
        grad = sum(ops.D[d].T @ dGx[:, :, d] for d in range(3))
        return e, grad.reshape(u.u.shape)
    if gradient:
        raise ValueError("analytic configurations are evaluated without gradient")
    X, W = quad if quad is not None else _analytic_points(geom.L)
    M = reference_factor(ribbon, X, t, w)
    F = u.grad_t(X) @ M
    return float(np.dot(density_w(moduli, F), W) / geom.L)


def sample_map(obj, grid):
    """Nodal sampling of an analytic 3D configuration or a surface immersion."""
    if isinstance(grid, Grid3):
        X = grid.nodes()
        return Config3(grid, obj.value(X))
    if isinstance(grid, SurfaceGrid):
        Z1, Z2 = grid.mesh()
        return SurfaceConfig(grid, obj.value(Z1, Z2))
    raise TypeError("grid must be a Grid3 or a SurfaceGrid")


# ---------------------------------------------------------------- reduced shell model

@dataclass
class SurfaceGrid:
    """Tensor grid on the physical strip (0, L) x (-w/2, w/2)."""
    n1: int
    n2: int
    w: float
    L: float = 1.0

    def __post_init__(self):
        if self.n1 < 6 or self.n2 < 6:
            raise ValueError("SurfaceGrid needs n1 >= 6, n2 >= 6")

    @property
    def axes(self):
        return np.linspace(0, self.L, self.n1), np.linspace(-self.w / 2, self.w / 2, self.n2)

    @property
    def spacing(self):
        return self.L / (self.n1 - 1), self.w / (self.n2 - 1)

    def mesh(self):
        return np.meshgrid(*self.axes, indexing="ij")


@dataclass
class SurfaceConfig:
    grid: SurfaceGrid
    f: np.ndarray              # (n1, n2, 3)
    cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=float)
        if self.f.shape != (self.grid.n1, self.grid.n2, 3):
            raise ValueError("nodal array does not match the surface grid")


_D1_INT = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2_INT = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
_D1_EDGE = (np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0,
            np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0)
_D2_EDGE = (np.array([45.0, -154.0, 214.0, -156.0, 61.0, -10.0]) / 12.0,
            np.array([10.0, -15.0, -4.0, 14.0, -6.0, 1.0]) / 12.0)


def _diff_1d(n, h):
    """Fourth-order first/second difference matrices, one-sided near the ends."""
    if n < 6:
        raise ValueError("fourth-order stencils need at least 6 nodes per direction")
    D = sp.lil_matrix((n, n))
    D2 = sp.lil_matrix((n, n))
    for i in range(2, n - 2):
        D[i, i - 2:i + 3] = _D1_INT / h
        D2[i, i - 2:i + 3] = _D2_INT / h ** 2
    for i in (0, 1):
        D[i, 0:5] = _D1_EDGE[i] / h
        D[n - 1 - i, n - 5:n] = -_D1_EDGE[i][::-1] / h
        D2[i, 0:6] = _D2_EDGE[i] / h ** 2
        D2[n - 1 - i, n - 6:n] = _D2_EDGE[i][::-1] / h ** 2
    return D.tocsr(), D2.tocsr()


def _simpson(n, h):
    """Composite Simpson weights (trapezoid correction on the last panel for even n)."""
    w = np.zeros(n)
    m = n if n % 2 else n - 1
    w[:m:2] = 2.0
    w[1:m:2] = 4.0
    w[0] = w[m - 1] = 1.0
    w *= h / 3.0
    if m < n:
        w[-2:] += 0.5 * h
    return w


class _SurfaceOps:
    def __init__(self, grid):
        n1, n2 = grid.n1, grid.n2
        h1, h2 = grid.spacing
        A1, A11 = _diff_1d(n1, h1)
        A2, A22 = _diff_1d(n2, h2)
        I1, I2 = sp.identity(n1), sp.identity(n2)
        self.D1 = sp.kron(A1, I2).tocsr()
        self.D2 = sp.kron(I1, A2).tocsr()
        self.D11 = sp.kron(A11, I2).tocsr()
        self.D22 = sp.kron(I1, A22).tocsr()
        self.D12 = sp.kron(A1, A2).tocsr()
        self.weights = np.outer(_simpson(n1, h1), _simpson(n2, h2)).ravel()
        self.area = grid.L * grid.w


_SOPS = {}


def _sops(grid):
    key = (grid.n1, grid.n2, grid.w, grid.L)
    if key not in _SOPS:
        _SOPS[key] = _SurfaceOps(grid)
    return _SOPS[key]


def fundamental_forms(f, margin=1e-6):
    """Nodal (a_f, II_f) from central differences; returns (a, II, normal, |f1 x f2|)."""
    ops = _sops(f.grid)
    X = f.f.reshape(-1, 3)
    f1, f2 = ops.D1 @ X, ops.D2 @ X
    f11, f12, f22 = ops.D11 @ X, ops.D12 @ X, ops.D22 @ X
    N = np.cross(f1, f2)
    nn = np.linalg.norm(N, axis=-1)
    if np.min(nn) < margin:
        k = int(np.argmin(nn))
        raise GeometryError(f"degenerate surface cell at node {np.unravel_index(k, f.f.shape[:2])}")
    nu = N / nn[:, None]
    a = np.stack([np.stack([np.sum(f1 * f1, -1), np.sum(f1 * f2, -1)], -1),
                  np.stack([np.sum(f1 * f2, -1), np.sum(f2 * f2, -1)], -1)], -2)
    l, m, n = (np.sum(v * nu, -1) for v in (f11, f12, f22))
    II = np.stack([np.stack([l, m], -1), np.stack([m, n], -1)], -2)
    shp = f.f.shape[:2]
    return (a.reshape(shp + (2, 2)), II.reshape(shp + (2, 2)), nu.reshape(shp + (3,)),
            nn.reshape(shp))


@dataclass
class ReducedTarget:
    """Reference forms sampled at the nodes plus quadrature weights."""
    a: np.ndarray
    II: np.ndarray
    weights: np.ndarray


def reduced_target(geom, grid):
    Z1, Z2 = grid.mesh()
    a = midsurface_metric(geom, Z1, Z2).reshape(-1, 2, 2)
    II = geom.second_form(Z1, Z2).reshape(-1, 2, 2)
    ops = _sops(grid)
    vol = np.sqrt(np.linalg.det(a))
    return ReducedTarget(a, II, ops.weights * vol / ops.area)


def reduced_energy(geom, t, w, f, weights=None, gradient=False, target=None, parts=False):
    """Mean of |a_f - a|^2 + t^2 |II_f - II|^2 with the volume form of a."""
    if abs(f.grid.w - w) > 1e-14:
        raise DomainError("surface grid width differs from w")
    ops = _sops(f.grid)
    tg = target or reduced_target(geom, f.grid)
    wts = tg.weights if weights is None else weights
    X = f.f.reshape(-1, 3)
    f1, f2 = ops.D1 @ X, ops.D2 @ X
    f11, f12, f22 = ops.D11 @ X, ops.D12 @ X, ops.D22 @ X
    N = np.cross(f1, f2)
    nn = np.linalg.norm(N, axis=-1)
    if np.min(nn) < 1e-12:
        k = int(np.argmin(nn))
        raise GeometryError(f"normal undefined at node {np.unravel_index(k, f.f.shape[:2])}")
    nu = N / nn[:, None]
    E11 = np.sum(f1 * f1, -1) - tg.a[:, 0, 0]
    E12 = np.sum(f1 * f2, -1) - tg.a[:, 0, 1]
    E22 = np.sum(f2 * f2, -1) - tg.a[:, 1, 1]
    K11 = np.sum(f11 * nu, -1) - tg.II[:, 0, 0]
    K12 = np.sum(f12 * nu, -1) - tg.II[:, 0, 1]
    K22 = np.sum(f22 * nu, -1) - tg.II[:, 1, 1]
    stretch = float(np.dot(E11 ** 2 + 2 * E12 ** 2 + E22 ** 2, wts))
    bend = float(np.dot(K11 ** 2 + 2 * K12 ** 2 + K22 ** 2, wts))
    e = stretch + t * t * bend
    if not gradient:
        return (e, stretch, bend) if parts else e
    ww = wts[:, None]
    g1 = 4 * ww * (E11[:, None] * f1 + E12[:, None] * f2)
    g2 = 4 * ww * (E12[:, None] * f1 + E22[:, None] * f2)
    # bending: d/dX of sum K_ab (f_ab . nu)
    tt = t * t
    v = K11[:, None] * f11 + 2 * K12[:, None] * f12 + K22[:, None] * f22
    p = (v - nu * np.sum(v * nu, -1, keepdims=True)) / nn[:, None]
    g1 = g1 + 2 * tt * ww * np.cross(f2, p)
    g2 = g2 + 2 * tt * ww * np.cross(p, f1)
    g11 = 2 * tt * ww * K11[:, None] * nu
    g12 = 4 * tt * ww * K12[:, None] * nu
    g22 = 2 * tt * ww * K22[:, None] * nu
    grad = (ops.D1.T @ g1 + ops.D2.T @ g2 + ops.D11.T @ g11 + ops.D12.T @ g12
            + ops.D22.T @ g22)
    out = (e, grad.reshape(f.f.shape))
    return out + (stretch, bend) if parts else out


def lift_planar(geom, grid):
    """Planar isometric embedding chi of the strip, lifted to R^3 (z = 0)."""
    from .geometry import planar_immersion
    chi = planar_immersion(geom, grid.w)
    Z1, Z2 = grid.mesh()
    p = chi(Z1, Z2)
    return SurfaceConfig(grid, np.concatenate([p, np.zeros(p.shape[:-1] + (1,))], -1))

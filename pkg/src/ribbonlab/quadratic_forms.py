"""Energy density, its Hessian form at the identity and the relaxed forms.

Matrices B in R^{3x3} are flattened row-major (index 3 i + j).  Symmetric
2x2 matrices use coordinates v = (A11, A12, A22).
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

UPPER = np.array([0, 1, 3, 4])           # entries 11, 12, 21, 22
FREE = np.array([2, 5, 6, 7, 8])         # entries 13, 23, 31, 32, 33
_T = np.array([[1.0, 0, 0], [0, 1, 0], [0, 1, 0], [0, 0, 1]])   # sym coords -> vec 2x2
DET_FORM = np.array([[0.0, 0, 0.5], [0, -1.0, 0], [0.5, 0, 0]])   # det in sym coords


@dataclass(frozen=True)
class IsotropicModuli:
    mu: float = 1.0
    lam: float = 0.0

    def __post_init__(self):
        if not self.mu > 0 or not 2 * self.mu + self.lam > 0:
            raise DomainError(f"moduli need mu > 0 and 2 mu + lambda > 0, got {self}")


def density_w(moduli, F):
    """W(F) = (mu/2)|F^T F - I|^2 + (lam/4) tr(F^T F - I)^2, batched over (..., 3, 3)."""
    F = np.asarray(F, dtype=float)
    E = np.einsum("...ki,...kj->...ij", F, F) - np.eye(3)
    tr = np.trace(E, axis1=-2, axis2=-1)
    return 0.5 * moduli.mu * np.sum(E * E, axis=(-2, -1)) + 0.25 * moduli.lam * tr ** 2


def density_piola(moduli, F):
    """dW/dF = F (2 mu E + lam tr(E) I) with E = F^T F - I."""
    F = np.asarray(F, dtype=float)
    E = np.einsum("...ki,...kj->...ij", F, F) - np.eye(3)
    tr = np.trace(E, axis1=-2, axis2=-1)
    S = 2 * moduli.mu * E + moduli.lam * tr[..., None, None] * np.eye(3)
    return F @ S


class QuadForm:
    """Quadratic form v^T M v; kind '3x3' (v = vec B) or 'sym2' (v = (a, b, c)).

    M may carry leading batch dimensions (one form per sample point).
    """

    def __init__(self, kind, matrix):
        if kind not in ("3x3", "sym2"):
            raise ValueError(kind)
        M = np.asarray(matrix, dtype=float)
        self.kind = kind
        self.matrix = 0.5 * (M + np.swapaxes(M, -1, -2))

    def coords(self, X):
        X = np.asarray(X, dtype=float)
        if self.kind == "3x3":
            return X.reshape(X.shape[:-2] + (9,))
        S = 0.5 * (X + np.swapaxes(X, -1, -2))
        return np.stack([S[..., 0, 0], S[..., 0, 1], S[..., 1, 1]], axis=-1)

    def __call__(self, X):
        v = self.coords(X)
        return np.einsum("...i,...ij,...j->...", v, self.matrix, v)

    def eigvalsh(self):
        return np.linalg.eigvalsh(self.matrix)

    def table(self):
        """Rows of coefficients, handy for CSV output."""
        return np.asarray(self.matrix).reshape(-1, self.matrix.shape[-1])


def _sym_projector():
    S = np.zeros((9, 9))
    for i in range(3):
        for j in range(3):
            S[3 * i + j, 3 * i + j] += 0.5
            S[3 * i + j, 3 * j + i] += 0.5
    return S


def q3_at_identity(moduli):
    """Q3(B) = 2 mu |sym B|^2 + lam (tr B)^2 as a 9x9 coefficient matrix."""
    S = _sym_projector()
    tr = np.zeros(9)
    tr[[0, 4, 8]] = 1.0
    M = 2 * moduli.mu * S.T @ S + moduli.lam * np.outer(tr, tr)
    return QuadForm("3x3", M)


def q3_from_matrix(C):
    """User-supplied 9x9 form, projected so that Q(B) = Q(sym B)."""
    S = _sym_projector()
    C = np.asarray(C, dtype=float)
    return QuadForm("3x3", S.T @ (0.5 * (C + C.T)) @ S)


def _kron_conj(X, Y):
    """Matrix of B -> X B Y on row-major vec: K[3i+j, 3k+l] = X[i,k] Y[l,j]."""
    K = np.einsum("...ik,...lj->...ijkl", X, Y)
    return K.reshape(K.shape[:-4] + (9, 9))


def conjugated(q3, X, Y):
    """Form B -> Q3(X B Y) (batched over X, Y)."""
    K = _kron_conj(np.asarray(X, float), np.asarray(Y, float))
    return QuadForm("3x3", np.swapaxes(K, -1, -2) @ q3.matrix @ K)


def schur_relax(C, fixed, free, rtol=1e-9):
    """Minimize over the `free` entries: returns (reduced matrix, completion map).

    The completion map G satisfies u* = G @ a for the fixed values a.
    """
    C = np.asarray(C, dtype=float)
    Cff = C[..., fixed[:, None], fixed[None, :]]
    Cfu = C[..., fixed[:, None], free[None, :]]
    Cuu = C[..., free[:, None], free[None, :]]
    pinv = np.linalg.pinv(Cuu, rcond=1e-12, hermitian=True)
    G = -pinv @ np.swapaxes(Cfu, -1, -2)
    resid = Cuu @ G + np.swapaxes(Cfu, -1, -2)
    scale = np.max(np.abs(C)) + 1e-300
    if np.max(np.abs(resid)) > rtol * scale:
        raise np.linalg.LinAlgError("singular reduced system in quadratic relaxation")
    red = Cff + Cfu @ G
    return 0.5 * (red + np.swapaxes(red, -1, -2)), G


class Completion:
    """Minimizing completion B(A) of a prescribed upper 2x2 block."""

    def __init__(self, G):
        self.G = G

    def __call__(self, A):
        A = np.asarray(A, dtype=float)
        a = A.reshape(A.shape[:-2] + (4,))
        u = np.einsum("...ij,...j->...i", self.G, a)
        B = np.zeros(A.shape[:-2] + (9,))
        B[..., UPPER] = a
        B[..., FREE] = u
        return B.reshape(A.shape[:-2] + (3, 3))


def relax_to_2x2(q3, frame=None):
    """Q2~(A) = min over B with upper block A of Q3(frame B frame^T).

    Returns (sym2 QuadForm, Completion).
    """
    q = q3 if frame is None else conjugated(q3, frame, np.swapaxes(np.asarray(frame), -1, -2))
    M4, G = schur_relax(q.matrix, UPPER, FREE)
    return QuadForm("sym2", _T.T @ M4 @ _T), Completion(G)


def isotropic_q2(moduli):
    mu, lam = moduli.mu, moduli.lam
    c = 2 * mu * lam / (2 * mu + lam)
    M = np.diag([2 * mu, 4 * mu, 2 * mu]) + c * np.array([[1.0, 0, 1], [0, 0, 0], [1, 0, 1]])
    return QuadForm("sym2", M)


def q2_circ(q2, a, b):
    """min over A22 of Q2~([[a, b], [b, A22]]); returns (value, A22*)."""
    M = q2.matrix
    a, b = np.asarray(a, float), np.asarray(b, float)
    c = -(M[..., 2, 0] * a + M[..., 2, 1] * b) / M[..., 2, 2]
    v = np.stack(np.broadcast_arrays(a, b, c), axis=-1)
    val = np.einsum("...i,...ij,...j->...", v, M, v)
    return val, c


def q1(q2):
    """min over A with A11 = 1 of Q2~(A); returns (value, (sym A12*, A22*))."""
    M = q2.matrix
    Mbc = M[..., 1:, 1:]
    Mba = M[..., 1:, 0]
    x = -np.linalg.solve(Mbc, Mba[..., None])[..., 0]
    val = M[..., 0, 0] + np.einsum("...i,...i->...", Mba, x)
    return val, x


def _min_eig(M):
    return np.linalg.eigvalsh(M)[..., 0]


def alpha_pm(q2, width=1e-10):
    """(alpha+, alpha-) by bisection on the smallest eigenvalue of M +- alpha D."""
    M = np.asarray(q2.matrix, dtype=float)
    out = []
    for sign in (1.0, -1.0):
        lo = np.zeros(M.shape[:-2])
        hi = np.ones(M.shape[:-2]) * np.max(np.abs(M)) * 4 + 1.0
        while True:
            bad = _min_eig(M + sign * hi[..., None, None] * DET_FORM) >= 0
            if not np.any(bad):
                break
            hi = np.where(bad, 2 * hi, hi)
        while np.max(hi - lo) > width:
            mid = 0.5 * (lo + hi)
            ok = _min_eig(M + sign * mid[..., None, None] * DET_FORM) >= 0
            lo = np.where(ok, mid, lo)
            hi = np.where(ok, hi, mid)
        out.append(lo if lo.ndim else float(lo))
    return tuple(out)


def plate_transform(ribbon, w, x1, x2):
    """A0 = F0^(1/2) (grad Phi | n) at (x1, w x2)."""
    x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
    z2 = w * x2
    D = ribbon.phi_derivs(x1, z2)
    nu, _, _ = _normal(D)
    Dm = np.stack([D["d1"], D["d2"], nu], axis=-1)
    det = np.linalg.det(Dm)
    if np.any(np.abs(det) < 1e-12):
        raise DomainError("A0 singular: (grad Phi | n) degenerate")
    Dinv = np.linalg.inv(Dm)
    diag = np.zeros(x1.shape + (3, 3))
    diag[..., 0, 0] = (1 - w * ribbon.geom.kappa(x1) * x2) ** 2
    diag[..., 1, 1] = 1.0
    diag[..., 2, 2] = 1.0
    F0 = np.swapaxes(Dinv, -1, -2) @ diag @ Dinv
    lam, V = np.linalg.eigh(F0)
    sq = (V * np.sqrt(lam)[..., None, :]) @ np.swapaxes(V, -1, -2)
    return sq @ Dm


def _normal(D):
    from .geometry import _normal_from
    return _normal_from(D)


def plate_form(geom, w, x1, x2, moduli=None, q3=None, ribbon=None):
    """Q_w(x', F) = min over G with upper block F of Q3(A0^-T G A0^-1)."""
    from .geometry import build_euclidean_ribbon
    q3 = q3_at_identity(moduli or IsotropicModuli()) if q3 is None else q3
    ribbon = build_euclidean_ribbon(geom) if ribbon is None else ribbon
    A0 = plate_transform(ribbon, w, x1, x2)
    Ainv = np.linalg.inv(A0)
    q = conjugated(q3, np.swapaxes(Ainv, -1, -2), Ainv)
    M4, _ = schur_relax(q.matrix, UPPER, FREE)
    return QuadForm("sym2", _T.T @ M4 @ _T)

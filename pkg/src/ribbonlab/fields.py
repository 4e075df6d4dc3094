"""Scalar fields on the midline and symmetric 2x2 fields on the strip."""

import numpy as np
from scipy.interpolate import make_interp_spline

_FD_STEP = 1e-3


def _fd1(f, s, h):
    return (-f(s + 2 * h) + 8 * f(s + h) - 8 * f(s - h) + f(s - 2 * h)) / (12 * h)


def sym2(lmn):
    """(..., 3) entries (l, m, n) -> (..., 2, 2) symmetric matrices."""
    lmn = np.asarray(lmn, dtype=float)
    out = np.empty(lmn.shape[:-1] + (2, 2))
    out[..., 0, 0] = lmn[..., 0]
    out[..., 0, 1] = lmn[..., 1]
    out[..., 1, 0] = lmn[..., 1]
    out[..., 1, 1] = lmn[..., 2]
    return out


class SmoothField1D:
    """Scalar function of z1 with value, first and second derivative.

    Missing derivatives fall back to 5-point central differences.
    """

    def __init__(self, value, d1=None, d2=None, label=""):
        self._f, self._d1, self._d2 = value, d1, d2
        self.label = label

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return np.broadcast_to(np.asarray(self._f(s), dtype=float), s.shape).copy()

    def d1(self, s):
        s = np.asarray(s, dtype=float)
        if self._d1 is not None:
            return np.broadcast_to(np.asarray(self._d1(s), float), s.shape).copy()
        return _fd1(self.__call__, s, _FD_STEP)

    def d2(self, s):
        s = np.asarray(s, dtype=float)
        if self._d2 is not None:
            return np.broadcast_to(np.asarray(self._d2(s), float), s.shape).copy()
        return _fd1(self.d1, s, _FD_STEP)

    @classmethod
    def constant(cls, c):
        c = float(c)
        return cls(lambda s: np.full(np.shape(s), c), lambda s: np.zeros(np.shape(s)),
                   lambda s: np.zeros(np.shape(s)), label=f"const({c})")

    @classmethod
    def polynomial(cls, coeffs):
        """coeffs[i] multiplies s**i."""
        p = np.polynomial.Polynomial(np.asarray(coeffs, dtype=float))
        dp, ddp = p.deriv(1), p.deriv(2)
        return cls(p, dp, ddp, label=f"poly{list(coeffs)}")

    @classmethod
    def from_samples(cls, s, values, lo=None, hi=None):
        """Quintic spline through samples; C2 Taylor extension outside [lo, hi]."""
        s = np.asarray(s, dtype=float)
        spl = make_interp_spline(s, np.asarray(values, dtype=float), k=5)
        lo = s[0] if lo is None else lo
        hi = s[-1] if hi is None else hi
        ends = np.array([lo, hi])
        v, d, dd = spl(ends), spl(ends, 1), spl(ends, 2)

        def ext(x, order):
            x = np.asarray(x, dtype=float)
            xc = np.clip(x, lo, hi)
            inside = spl(xc, order)
            j = (x > hi).astype(int)
            dx = x - ends[j]
            if order == 0:
                taylor = v[j] + d[j] * dx + 0.5 * dd[j] * dx ** 2
            elif order == 1:
                taylor = d[j] + dd[j] * dx
            else:
                taylor = dd[j] + 0 * dx
            return np.where((x < lo) | (x > hi), taylor, inside)

        return cls(lambda x: ext(x, 0), lambda x: ext(x, 1), lambda x: ext(x, 2),
                   label="spline")


def as_field(f):
    """Coerce a number, callable or SmoothField1D into a SmoothField1D."""
    if isinstance(f, SmoothField1D):
        return f
    if callable(f):
        return SmoothField1D(f)
    return SmoothField1D.constant(f)


class SymField2x2:
    """Symmetric 2x2 field of (z1, z2), stored through its entries (l, m, n).

    `entries(z1, z2)` returns (..., 3).  Partials default to 5-point
    central differences unless supplied.
    """

    def __init__(self, entries, d1=None, d2=None, d11=None, label=""):
        self._e, self._d1, self._d2, self._d11 = entries, d1, d2, d11
        self.label = label

    def lmn(self, z1, z2):
        z1, z2 = np.broadcast_arrays(np.asarray(z1, float), np.asarray(z2, float))
        out = np.asarray(self._e(z1, z2), dtype=float)
        return np.broadcast_to(out, z1.shape + (3,)).copy()

    def d1_lmn(self, z1, z2):
        z1, z2 = np.broadcast_arrays(np.asarray(z1, float), np.asarray(z2, float))
        if self._d1 is not None:
            return np.broadcast_to(np.asarray(self._d1(z1, z2), float), z1.shape + (3,)).copy()
        return _fd1(lambda s: self.lmn(s, z2), z1, _FD_STEP)

    def d2_lmn(self, z1, z2):
        z1, z2 = np.broadcast_arrays(np.asarray(z1, float), np.asarray(z2, float))
        if self._d2 is not None:
            return np.broadcast_to(np.asarray(self._d2(z1, z2), float), z1.shape + (3,)).copy()
        return _fd1(lambda s: self.lmn(z1, s), z2, _FD_STEP)

    def d11_lmn(self, z1, z2):
        z1, z2 = np.broadcast_arrays(np.asarray(z1, float), np.asarray(z2, float))
        if self._d11 is not None:
            return np.broadcast_to(np.asarray(self._d11(z1, z2), float), z1.shape + (3,)).copy()
        return _fd1(lambda s: self.d1_lmn(s, z2), z1, _FD_STEP)

    def __call__(self, z1, z2):
        return sym2(self.lmn(z1, z2))

    def partials(self, z1, z2):
        return sym2(self.d1_lmn(z1, z2)), sym2(self.d2_lmn(z1, z2))

    @classmethod
    def polynomial(cls, terms, label="poly"):
        """terms: {(i, j): (l, m, n)} meaning coefficient of z1**i * z2**j."""
        terms = {tuple(k): np.asarray(v, dtype=float) for k, v in terms.items()}

        def build(di, dj):
            def f(z1, z2):
                out = np.zeros(np.shape(z1) + (3,))
                for (i, j), c in terms.items():
                    if i < di or j < dj:
                        continue
                    fi = np.prod(np.arange(i - di + 1, i + 1)) if di else 1.0
                    fj = np.prod(np.arange(j - dj + 1, j + 1)) if dj else 1.0
                    mono = fi * fj * np.power(z1, i - di) * np.power(z2, j - dj)
                    out = out + mono[..., None] * c
                return out
            return f

        return cls(build(0, 0), build(1, 0), build(0, 1), build(2, 0), label=label)

    @classmethod
    def constant(cls, l, m, n):
        return cls.polynomial({(0, 0): (l, m, n)}, label=f"const({l},{m},{n})")

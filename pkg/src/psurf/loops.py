"""Twisted 2x2 matrix Laurent loops and the su(2) <-> R^3 dictionary.

Loops are truncated Laurent polynomials sum_k c_k lambda^k with 2x2 complex
coefficients; this keeps lambda-derivatives exact and makes the splitting
solvers finite linear algebra.  A loop is "twisted" when even-degree
coefficients are diagonal and odd-degree ones off-diagonal, and
"unitary-valued" when its values on the real axis are in SU(2) up to a
monitored tolerance.
"""

from __future__ import annotations

import numpy as np

DEFAULT_TOL = 1e-10
TRIM_REL = 1e-14

# lambda samples used for unitarity / determinant spot checks on the real axis
UNITARITY_SAMPLES = (0.25, 0.5, 1.0, 2.0, 4.0)

# su(2) images of the R^3 basis; the commutator matches the cross product.
SU2_I = np.array([[0.0, 0.5j], [0.5j, 0.0]])
SU2_J = np.array([[0.0, -0.5], [0.5, 0.0]], dtype=complex)
SU2_K = np.array([[0.5j, 0.0], [0.0, -0.5j]])

_EYE2 = np.eye(2, dtype=complex)


def _frob(m):
    return float(np.linalg.norm(m))


class LaurentLoop:
    """Immutable matrix Laurent polynomial with degrees d_min..d_max."""

    __slots__ = ("coeffs", "d_min")

    def __init__(self, coeffs, d_min, copy=True):
        arr = np.array(coeffs, dtype=complex, copy=copy)
        if arr.ndim != 3 or arr.shape[1:] != (2, 2) or arr.shape[0] == 0:
            raise ValueError("coeffs must have shape (n, 2, 2) with n >= 1")
        arr.flags.writeable = False
        self.coeffs = arr
        self.d_min = int(d_min)

    # -- constructors ------------------------------------------------------

    @staticmethod
    def identity():
        return LaurentLoop(_EYE2[None, :, :], 0)

    @staticmethod
    def zero():
        return LaurentLoop(np.zeros((1, 2, 2), dtype=complex), 0)

    @staticmethod
    def constant(m):
        return LaurentLoop(np.asarray(m, dtype=complex)[None, :, :], 0)

    @staticmethod
    def from_terms(terms):
        """Build from a {degree: 2x2 matrix} mapping."""
        if not terms:
            return LaurentLoop.zero()
        lo, hi = min(terms), max(terms)
        coeffs = np.zeros((hi - lo + 1, 2, 2), dtype=complex)
        for k, m in terms.items():
            coeffs[k - lo] = np.asarray(m, dtype=complex)
        return LaurentLoop(coeffs, lo, copy=False)

    # -- basic structure ---------------------------------------------------

    @property
    def d_max(self):
        return self.d_min + self.coeffs.shape[0] - 1

    @property
    def degrees(self):
        return range(self.d_min, self.d_max + 1)

    def coeff(self, k):
        """Coefficient of lambda^k (zero matrix outside the stored band)."""
        if self.d_min <= k <= self.d_max:
            return self.coeffs[k - self.d_min]
        return np.zeros((2, 2), dtype=complex)

    def max_coeff_norm(self):
        return float(np.max(np.linalg.norm(self.coeffs, axis=(1, 2))))

    def __repr__(self):
        return "LaurentLoop(degrees [%d, %d], max coeff %.3g)" % (
            self.d_min, self.d_max, self.max_coeff_norm())

    # -- ring operations ---------------------------------------------------

    def __mul__(self, other):
        """Loop product (Cauchy product of coefficient sequences).

        A plain 2x2 array is treated as a constant loop, which avoids the
        degree bookkeeping for the frequent gauge-by-constant case.
        """
        if isinstance(other, np.ndarray):
            return LaurentLoop(self.coeffs @ other, self.d_min, copy=False)
        if not isinstance(other, LaurentLoop):
            return NotImplemented
        a, b = self.coeffs, other.coeffs
        n = a.shape[0] + b.shape[0] - 1
        out = np.zeros((n, 2, 2), dtype=complex)
        # convolve along the shorter operand
        if b.shape[0] <= a.shape[0]:
            for j in range(b.shape[0]):
                out[j:j + a.shape[0]] += a @ b[j]
        else:
            for j in range(a.shape[0]):
                out[j:j + b.shape[0]] += a[j] @ b
        return LaurentLoop(out, self.d_min + other.d_min, copy=False)

    def __rmul__(self, other):
        if isinstance(other, np.ndarray):
            return LaurentLoop(other @ self.coeffs, self.d_min, copy=False)
        if isinstance(other, (int, float, complex)):
            return LaurentLoop(other * self.coeffs, self.d_min, copy=False)
        return NotImplemented

    def __add__(self, other):
        if not isinstance(other, LaurentLoop):
            return NotImplemented
        lo = min(self.d_min, other.d_min)
        hi = max(self.d_max, other.d_max)
        out = np.zeros((hi - lo + 1, 2, 2), dtype=complex)
        out[self.d_min - lo: self.d_max - lo + 1] = self.coeffs
        out[other.d_min - lo: other.d_max - lo + 1] += other.coeffs
        return LaurentLoop(out, lo, copy=False)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __neg__(self):
        return (-1.0) * self

    def scaled(self, s):
        return LaurentLoop(s * self.coeffs, self.d_min, copy=False)

    # -- maps on loops -----------------------------------------------------

    def evaluate(self, lam):
        """Sum c_k lam^k; lam may be a scalar or an array of nonzero values."""
        lam = np.asarray(lam, dtype=complex)
        if self.d_min < 0 and np.any(lam == 0):
            raise ValueError("lambda = 0 not in the domain of a loop with negative degrees")
        ks = np.arange(self.d_min, self.d_max + 1)
        powers = lam[..., None] ** ks
        return np.einsum("...k,kij->...ij", powers, self.coeffs)

    def dagger(self):
        """Coefficientwise conjugate transpose.

        On the real axis this is the pointwise adjoint, hence the inverse of
        a unitary-valued loop.
        """
        return LaurentLoop(np.conj(np.transpose(self.coeffs, (0, 2, 1))),
                           self.d_min, copy=False)

    def inverse_unitary(self, tol=1e-8, samples=UNITARITY_SAMPLES):
        """Inverse of a unitary-valued det-1 loop (the dagger loop).

        Rejects inputs whose determinant drifts from 1 at the sample points,
        since the dagger is only the inverse on that class.
        """
        vals = self.evaluate(np.asarray(samples))
        dets = vals[..., 0, 0] * vals[..., 1, 1] - vals[..., 0, 1] * vals[..., 1, 0]
        defect = float(np.max(np.abs(dets - 1.0)))
        if defect > tol:
            raise ValueError(f"det deviates from 1 by {defect:.3g}; loop is not unitary-valued")
        return self.dagger()

    def transpose_loop(self):
        return LaurentLoop(np.transpose(self.coeffs, (0, 2, 1)), self.d_min, copy=False)

    def reflect(self):
        """lambda -> 1/lambda: coefficient index negation."""
        return LaurentLoop(self.coeffs[::-1], -self.d_max, copy=False)

    def log_lambda_derivative(self):
        """d/d(log lambda): c_k -> k c_k, exact on the coefficient band."""
        ks = np.arange(self.d_min, self.d_max + 1, dtype=float)
        return LaurentLoop(ks[:, None, None] * self.coeffs, self.d_min, copy=False)

    def truncated(self, lo, hi):
        """Restrict to degrees lo..hi (zero-padded if the band is larger)."""
        if lo > hi:
            raise ValueError("empty degree band")
        out = np.zeros((hi - lo + 1, 2, 2), dtype=complex)
        s_lo, s_hi = max(lo, self.d_min), min(hi, self.d_max)
        if s_lo <= s_hi:
            out[s_lo - lo: s_hi - lo + 1] = self.coeffs[s_lo - self.d_min: s_hi - self.d_min + 1]
        return LaurentLoop(out, lo, copy=False)

    def trim(self, rel=TRIM_REL):
        """Drop leading/trailing coefficients below rel * max coefficient norm."""
        norms = np.linalg.norm(self.coeffs, axis=(1, 2))
        cut = rel * float(np.max(norms))
        keep = np.nonzero(norms > cut)[0]
        if keep.size == 0:
            return LaurentLoop.zero()
        lo, hi = keep[0], keep[-1]
        return LaurentLoop(self.coeffs[lo:hi + 1], self.d_min + lo)

    # -- diagnostics ---------------------------------------------------------

    def check_twist(self):
        """Max over k of the part of c_k violating the twist pattern.

        Even degrees must be diagonal, odd degrees off-diagonal; the residual
        is 0 exactly on twisted loops.
        """
        res = 0.0
        for k in self.degrees:
            c = self.coeffs[k - self.d_min]
            if k % 2 == 0:
                res = max(res, abs(c[0, 1]), abs(c[1, 0]))
            else:
                res = max(res, abs(c[0, 0]), abs(c[1, 1]))
        return float(res)


def unitarity_defect(g, samples=UNITARITY_SAMPLES):
    """(max ||g(l)^+ g(l) - I||, max |det g(l) - 1|) over real sample points."""
    vals = g.evaluate(np.asarray(samples, dtype=float))
    gram = np.conj(np.transpose(vals, (0, 2, 1))) @ vals
    u_def = float(np.max(np.abs(gram - _EYE2)))
    dets = vals[:, 0, 0] * vals[:, 1, 1] - vals[:, 0, 1] * vals[:, 1, 0]
    return u_def, float(np.max(np.abs(dets - 1.0)))


def inverse_one_sided(g, trunc):
    """Formal inverse of a one-sided loop with invertible lambda^0 coefficient.

    For g = g0 (I + N) with N supported on strictly positive (or strictly
    negative) degrees, returns the Neumann-series inverse truncated at
    |degree| <= trunc.  Exact in the truncated algebra.
    """
    if g.d_min > 0 or g.d_max < 0:
        raise ValueError("loop must contain degree 0")
    if g.d_min < 0 and g.d_max > 0:
        raise ValueError("loop must be one-sided (all degrees >= 0 or all <= 0)")
    if g.d_min == g.d_max == 0:
        return LaurentLoop.constant(np.linalg.inv(g.coeff(0)))
    if g.d_min < 0:
        return inverse_one_sided(g.reflect(), trunc).reflect()
    g0_inv = np.linalg.inv(g.coeff(0))
    p = g0_inv @ g.coeffs  # (I + N) with N strictly positive degrees
    n = min(trunc, 10**6)
    out = np.zeros((n + 1, 2, 2), dtype=complex)
    out[0] = _EYE2
    width = g.coeffs.shape[0]
    for k in range(1, n + 1):
        acc = np.zeros((2, 2), dtype=complex)
        for j in range(1, min(k, width - 1) + 1):
            acc += p[j] @ out[k - j]
        out[k] = -acc
    return LaurentLoop(out, 0, copy=False) * g0_inv


def exp_loop(x, band):
    """exp of a loop by its power series, truncated to degrees band[0]..band[1].

    Converges for any x; terms are added until they fall below 1e-17 of the
    running maximum coefficient norm.
    """
    lo, hi = band
    acc = LaurentLoop.identity().truncated(lo, hi)
    term = LaurentLoop.identity().truncated(lo, hi)
    for n in range(1, 60):
        term = (term * x).truncated(lo, hi).scaled(1.0 / n)
        acc = acc + term
        if term.max_coeff_norm() < 1e-17 * max(1.0, acc.max_coeff_norm()):
            break
    return acc


def random_twisted_su_loop(rng, degree=2, scale=0.5, decay=0.3):
    """Random twisted su(2)-valued Laurent loop (algebra element).

    Coefficient k is skew-Hermitian traceless, diagonal for even k and
    off-diagonal for odd k, with norm ~ scale * decay**|k|.
    """
    terms = {}
    for k in range(-degree, degree + 1):
        amp = scale * decay ** abs(k)
        if k % 2 == 0:
            t = amp * rng.standard_normal()
            terms[k] = np.array([[1j * t, 0.0], [0.0, -1j * t]])
        else:
            z = amp * (rng.standard_normal() + 1j * rng.standard_normal()) / np.sqrt(2)
            terms[k] = np.array([[0.0, z], [-np.conj(z), 0.0]])
    return LaurentLoop.from_terms(terms)


def random_twisted_unitary_loop(rng, degree=4, scale=0.5, decay=0.3, alg_degree=None, pad=0):
    """Random twisted approximately-unitary loop with degrees in [-degree-pad, degree+pad].

    Built as exp of a random twisted algebra loop supported on [-alg_degree,
    alg_degree].  The trimmed exp tail is the only source of unitarity
    defect; pad widens the retained band when a test needs the loop to be
    unitary-valued to near machine precision at large |lambda| samples.
    """
    if alg_degree is None:
        alg_degree = max(1, degree // 2)
    x = random_twisted_su_loop(rng, degree=alg_degree, scale=scale, decay=decay)
    return exp_loop(x, (-degree - pad, degree + pad))


# -- su(2) <-> R^3 ---------------------------------------------------------

def su2_to_r3(m, tol=1e-6):
    """Coordinates of a traceless skew-Hermitian matrix in the (i,j,k) basis."""
    m = np.asarray(m, dtype=complex)
    defect = _frob(m + np.conj(m.T))
    if defect > tol * max(1.0, _frob(m)):
        raise ValueError(f"matrix is not skew-Hermitian (residual {defect:.3g})")
    return np.array([2.0 * m[0, 1].imag,
                     -2.0 * m[0, 1].real,
                     2.0 * m[0, 0].imag])


def r3_to_su2(v):
    v = np.asarray(v, dtype=float)
    return v[0] * SU2_I + v[1] * SU2_J + v[2] * SU2_K


def adjoint_rotation(g, tol=1e-6):
    """SO(3) matrix of Ad(g) for g in SU(2); kills the double-cover sign."""
    g = np.asarray(g, dtype=complex)
    gram_defect = _frob(np.conj(g.T) @ g - _EYE2)
    det = g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
    if gram_defect > tol or abs(det - 1.0) > tol:
        raise ValueError(f"matrix is not in SU(2) (unitarity {gram_defect:.3g}, det {det:.6g})")
    g_inv = np.conj(g.T)
    cols = [su2_to_r3(g @ b @ g_inv, tol=10 * max(tol, 1e-12))
            for b in (SU2_I, SU2_J, SU2_K)]
    return np.column_stack(cols)

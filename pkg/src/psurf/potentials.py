"""Potential pairs along the two asymptotic axes.

A pair holds the loop-valued 1-form coefficients eta_x(x), eta_y(y).  The
normalized kind is pinned to pure degree +1 / -1 with unit speeds and is
determined by boundary angles; the generalized kind allows wider
lambda-expansions with nonvanishing top terms, from which speeds and phases
are extracted numerically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from psurf.loops import LaurentLoop, unitarity_defect

EQUIV_LAMBDAS = np.concatenate([np.exp(2j * np.pi * np.arange(16) / 16.0),
                                [0.5 + 0j, 2.0 + 0j]])


def _offdiag(z):
    return np.array([[0.0, z], [-np.conj(z), 0.0]])


def _phase_matrix(alpha):
    e = np.exp(1j * alpha)
    return 0.5j * np.array([[0.0, np.conj(e)], [e, 0.0]])


@dataclass(frozen=True)
class BoundaryAngles:
    """Angle data along the axes: alpha(x) = phi(x,0) - phi(0,0), beta(y) = phi(0,y).

    Speeds default to 1 (None); nonunit speeds belong to generalized
    potentials and the Goursat oracle.
    """

    alpha: object
    beta: object
    a: object = None
    b: object = None

    def speed_a(self):
        return self.a if callable(self.a) else (lambda t: np.ones_like(np.asarray(t, dtype=float)))

    def speed_b(self):
        return self.b if callable(self.b) else (lambda t: np.ones_like(np.asarray(t, dtype=float)))


@dataclass(frozen=True)
class PotentialPair:
    """eta_x, eta_y: parameter -> LaurentLoop (coefficients of dx, dy)."""

    eta_x: object
    eta_y: object
    kind: str
    domain_x: tuple = (-1.0, 1.0)
    domain_y: tuple = (-1.0, 1.0)
    boundary: BoundaryAngles = None
    meta: dict = field(default_factory=dict)


def normalized_from_boundary(bnd, domain_x=(-1.0, 1.0), domain_y=(-1.0, 1.0)):
    """Pair of normalized potentials for the given boundary angles."""
    a0 = float(np.asarray(bnd.alpha(0.0)))
    # 1e-8 leaves room for spline interpolants of tabulated angles
    if abs(a0) > 1e-8:
        raise ValueError(f"alpha(0) must vanish, got {a0}")
    if bnd.a is not None or bnd.b is not None:
        raise ValueError("normalized potentials have unit speeds; "
                         "use a generalized pair for nonunit speeds")

    def eta_x(x):
        return LaurentLoop.from_terms({1: _phase_matrix(bnd.alpha(x))})

    def eta_y(y):
        return LaurentLoop.from_terms({-1: -_phase_matrix(-bnd.beta(y))})

    return PotentialPair(eta_x=eta_x, eta_y=eta_y, kind="normalized",
                         domain_x=tuple(domain_x), domain_y=tuple(domain_y),
                         boundary=bnd)


def stretched_from_boundary(bnd, domain_x=(-1.0, 1.0), domain_y=(-1.0, 1.0)):
    """Generalized pair with speeds: the top-degree terms carry a(x), b(y)."""
    a0 = float(np.asarray(bnd.alpha(0.0)))
    if abs(a0) > 1e-8:
        raise ValueError(f"alpha(0) must vanish, got {a0}")
    a_fn, b_fn = bnd.speed_a(), bnd.speed_b()

    def eta_x(x):
        return LaurentLoop.from_terms({1: float(a_fn(x)) * _phase_matrix(bnd.alpha(x))})

    def eta_y(y):
        return LaurentLoop.from_terms({-1: -float(b_fn(y)) * _phase_matrix(-bnd.beta(y))})

    return PotentialPair(eta_x=eta_x, eta_y=eta_y, kind="generalized",
                         domain_x=tuple(domain_x), domain_y=tuple(domain_y),
                         boundary=bnd)


# -- axis data extraction ----------------------------------------------------

def _unwrapped_angle(dense_t, dense_w):
    ang = np.unwrap(np.angle(dense_w))
    return CubicSpline(dense_t, ang)


def x_axis_data(pair, n_dense=2049):
    """(a(x), alpha(x)) with i/2 a e^{-i alpha} the top off-diagonal entry of
    the lambda^1 coefficient of eta_x."""
    if pair.kind == "normalized" and pair.boundary is not None:
        one = lambda t: np.ones_like(np.asarray(t, dtype=float))
        return one, pair.boundary.alpha
    lo, hi = pair.domain_x
    ts = np.linspace(lo, hi, n_dense)
    zs = np.array([pair.eta_x(t).coeff(1)[0, 1] for t in ts])
    if np.min(np.abs(zs)) < 1e-14:
        raise ValueError("lambda^1 coefficient of eta_x vanishes on the domain")
    spl = _unwrapped_angle(ts, -2j * zs)

    def a_fn(t):
        z = pair.eta_x(t).coeff(1)[0, 1] if np.isscalar(t) else \
            np.array([pair.eta_x(v).coeff(1)[0, 1] for v in np.asarray(t)])
        return 2.0 * np.abs(z)

    def alpha_fn(t):
        return -spl(t)

    return a_fn, alpha_fn


def y_axis_data(pair, n_dense=2049):
    """(b(y), beta(y)) with rho = -b e^{i beta} = -2i * (lambda^-1 coeff)[0,1]."""
    if pair.kind == "normalized" and pair.boundary is not None:
        one = lambda t: np.ones_like(np.asarray(t, dtype=float))
        return one, pair.boundary.beta
    lo, hi = pair.domain_y
    ts = np.linspace(lo, hi, n_dense)
    zs = np.array([pair.eta_y(t).coeff(-1)[0, 1] for t in ts])
    if np.min(np.abs(zs)) < 1e-14:
        raise ValueError("lambda^-1 coefficient of eta_y vanishes on the domain")
    spl = _unwrapped_angle(ts, 2j * zs)  # -rho = 2i z

    def b_fn(t):
        z = pair.eta_y(t).coeff(-1)[0, 1] if np.isscalar(t) else \
            np.array([pair.eta_y(v).coeff(-1)[0, 1] for v in np.asarray(t)])
        return 2.0 * np.abs(z)

    def beta_fn(t):
        return spl(t)

    return b_fn, beta_fn


# -- gauges ------------------------------------------------------------------

def _as_loop_fn(q):
    if q is None:
        ident = LaurentLoop.identity()
        return (lambda t: ident), True
    if isinstance(q, LaurentLoop):
        return (lambda t: q), True
    return q, False


def _validate_gauge(q_fn, side, domain, n_check=7):
    for t in np.linspace(domain[0], domain[1], n_check):
        q = q_fn(t)
        if side == "-" and q.d_max > 0:
            raise ValueError("x-gauge must lie in the minus loop group")
        if side == "+" and q.d_min < 0:
            raise ValueError("y-gauge must lie in the plus loop group")
        u_def, det_def = unitarity_defect(q, samples=(0.5, 1.0, 2.0))
        if max(u_def, det_def) > 1e-6:
            raise ValueError(f"gauge loop is not unitary-valued (defect {max(u_def, det_def):.3g})")
        if q.check_twist() > 1e-8:
            raise ValueError("gauge loop violates the twist condition")


def _loop_derivative(q_fn, t, h):
    # 5-point central difference, coefficientwise
    vals = [q_fn(t + k * h) for k in (-2, -1, 1, 2)]
    acc = vals[0].scaled(1.0 / (12 * h)) + vals[1].scaled(-8.0 / (12 * h)) \
        + vals[2].scaled(8.0 / (12 * h)) + vals[3].scaled(-1.0 / (12 * h))
    return acc


def gauge_transform(pair, qx=None, qy=None, dqx=None, dqy=None, fd_step=1e-5):
    """Gauged pair eta~ = q^-1 eta q + q^-1 q' along each axis.

    qx (x-parametrized, minus loops) and qy (y-parametrized, plus loops) may
    be callables, constant loops, or None.  Derivatives default to central
    differences with the given step; the result is a generalized pair for
    the same surface when the frame integration is started from the gauge
    values at the basepoint.
    """
    qx_fn, qx_const = _as_loop_fn(qx)
    qy_fn, qy_const = _as_loop_fn(qy)
    _validate_gauge(qx_fn, "-", pair.domain_x)
    _validate_gauge(qy_fn, "+", pair.domain_y)

    def tilde(eta, q_fn, is_const, dq, t):
        q = q_fn(t)
        q_inv = q.dagger()
        out = (q_inv * eta(t)) * q
        if not is_const:
            qd = dq(t) if dq is not None else _loop_derivative(q_fn, t, fd_step)
            out = out + q_inv * qd
        return out.trim(rel=1e-13)

    eta_x = lambda x: tilde(pair.eta_x, qx_fn, qx_const, dqx, x)
    eta_y = lambda y: tilde(pair.eta_y, qy_fn, qy_const, dqy, y)
    return PotentialPair(eta_x=eta_x, eta_y=eta_y, kind="generalized",
                         domain_x=pair.domain_x, domain_y=pair.domain_y,
                         meta={"gauged_from": pair.kind})


# -- equivariance ------------------------------------------------------------

def check_equivariance(pair, gamma1, gamma2, wx, wy, dgamma1=None, dgamma2=None,
                       dwx=None, dwy=None, sample_x=None, sample_y=None,
                       n_samples=33, lambdas=EQUIV_LAMBDAS, fd_step=None):
    """Residuals of the potential-level symmetry condition along each axis.

    Checks (eta o gamma) gamma' = w^-1 eta w + w^-1 w' at sampled parameters
    and lambda values; (0, 0) certifies the symmetry on the potentials.
    """
    wx_fn, wx_const = _as_loop_fn(wx)
    wy_fn, wy_const = _as_loop_fn(wy)

    def axis_residual(eta, gamma, dgamma, w_fn, w_const, dw, window, domain):
        lo, hi = window if window is not None else domain
        ts = np.linspace(lo, hi, n_samples)
        h = fd_step if fd_step is not None else 1e-4 * (domain[1] - domain[0])
        res = 0.0
        for t in ts:
            if dgamma is not None:
                gp = dgamma(t)
            else:
                gp = (gamma(t + h) - gamma(t - h)) / (2.0 * h)
            if abs(gp) < 1e-12:
                raise ValueError(f"gamma derivative vanishes near t = {t}")
            w = w_fn(t)
            w_inv = w.dagger()
            rhs = (w_inv * eta(t)) * w
            if not w_const:
                wd = dw(t) if dw is not None else _loop_derivative(w_fn, t, h)
                rhs = rhs + w_inv * wd
            lhs = eta(gamma(t)).scaled(gp)
            diff = (lhs - rhs).evaluate(lambdas)
            res = max(res, float(np.max(np.abs(diff))))
        return res

    rx = axis_residual(pair.eta_x, gamma1, dgamma1, wx_fn, wx_const, dwx,
                       sample_x, pair.domain_x)
    ry = axis_residual(pair.eta_y, gamma2, dgamma2, wy_fn, wy_const, dwy,
                       sample_y, pair.domain_y)
    return rx, ry


# -- the rotationally symmetric example ---------------------------------------

def cayley(t):
    """C(t) = (t - i)/(t + i), real line onto the unit circle."""
    t = np.asarray(t, dtype=complex)
    return (t - 1j) / (t + 1j)


def _amsler_p(t):
    # p = d/dt (Q(w)/w) with Q(w) = w^3 + w^-3, w = C(t)
    w = cayley(t)
    dw = 2j / (np.asarray(t, dtype=complex) + 1j) ** 2
    return dw * (2.0 * w - 4.0 * w ** -5)


def amsler_gamma(t, sign=1):
    """Axis map: conjugate of the 2 pi/3 circle rotation by the Cayley transform."""
    mu = np.exp(sign * 2j * np.pi / 3.0)
    w = mu * cayley(t)
    return float((1j * (1.0 + w) / (1.0 - w)).real)


def amsler_dgamma(t, sign=1):
    mu = np.exp(sign * 2j * np.pi / 3.0)
    w = cayley(t)
    val = -4.0 * mu / ((1.0 - mu * w) ** 2 * (np.asarray(t, dtype=complex) + 1j) ** 2)
    return float(val.real)


AMSLER_GAMMA_POLE = float(np.tan(np.pi / 6.0))  # gamma blows up here


def generalized_amsler_example(domain=(-4.0, 4.0)):
    """Potential pair and symmetry data of the rotationally symmetric example.

    eta^x(x) = (lambda + 1/lambda) [[0, p(x)], [-conj p(x), 0]] with the same
    p on the y-axis; the symmetry gauge is the constant diagonal third-root
    rotation and the axis maps conjugate the 2 pi/3 circle rotation by the
    Cayley transform.
    """
    from psurf.symmetry import SymmetryDescriptor

    def eta(t):
        m = _offdiag(complex(_amsler_p(t)))
        return LaurentLoop.from_terms({1: m, -1: m})

    pair = PotentialPair(eta_x=eta, eta_y=eta, kind="generalized",
                         domain_x=tuple(domain), domain_y=tuple(domain),
                         meta={"name": "amsler3", "gamma_pole": AMSLER_GAMMA_POLE})
    gauge = LaurentLoop.constant(np.diag([np.exp(1j * np.pi / 3.0),
                                          np.exp(-1j * np.pi / 3.0)]))
    descriptor = SymmetryDescriptor(
        gamma1=amsler_gamma, gamma2=amsler_gamma,
        dgamma1=amsler_dgamma, dgamma2=amsler_dgamma,
        wx=gauge, wy=gauge)
    return pair, descriptor


# -- diagonal-restriction potentials ------------------------------------------

def _fd_weights_5(n, i, h):
    """(offsets, weights) of the 5-point first-derivative stencil at row i."""
    if i < 2:
        offs = np.arange(0, 5) - i
    elif i > n - 3:
        offs = np.arange(-4, 1) + (n - 1 - i)
    else:
        offs = np.arange(-2, 3)
    # solve Vandermonde for the first-derivative weights
    a = np.vander(offs * h, 5, increasing=True).T
    rhs = np.zeros(5)
    rhs[1] = 1.0
    return offs, np.linalg.solve(a, rhs)


def _project_twisted_su(coeffs, d_min):
    """Project loop coefficients onto the twisted su(2) pattern.

    The true potential has skew-Hermitian traceless coefficients, diagonal
    at even degrees and off-diagonal at odd ones; finite-difference noise
    off that structure would otherwise leak into unitarity drift.
    """
    out = np.array(coeffs, copy=True)
    for idx in range(out.shape[0]):
        c = out[idx]
        c = 0.5 * (c - np.conj(c.T))
        c -= 0.5 * np.trace(c) * np.eye(2)
        k = d_min + idx
        if k % 2 == 0:
            c[0, 1] = c[1, 0] = 0.0
        else:
            c[0, 0] = c[1, 1] = 0.0
        out[idx] = c
    return out


def extract_diagonal_potentials(frame_grid):
    """Generalized pair from the frame's Maurer-Cartan form on the grid diagonal.

    Both returned potentials are the loop d/dt[U(t,t)] pulled back by
    U(t,t)^-1, i.e. the full diagonal derivative.  This is the gauge of the
    normalized pair by the diagonal restrictions of the splitting factors
    (those restrictions enter through both partial derivatives, so the
    cross terms cannot be dropped), and rebuilding from it reproduces the
    surface.  Requires a uniformly spaced square grid; derivatives are
    5-point finite differences along the diagonal, projected back onto the
    twisted su(2) structure.
    """
    x = np.asarray(frame_grid.x, dtype=float)
    y = np.asarray(frame_grid.y, dtype=float)
    if x.size != y.size or np.max(np.abs(x - y)) > 1e-12:
        raise ValueError("diagonal extraction needs a square grid (x and y samples equal)")
    n = x.size
    if n < 5:
        raise ValueError("need at least 5 diagonal nodes")
    hx = np.diff(x)
    if np.max(np.abs(hx - hx[0])) > 1e-9 * abs(hx[0]):
        raise ValueError("diagonal extraction requires uniform spacing")
    h = float(hx[0])

    band = (-1, 1)
    samples = []
    for i in range(n):
        offs, wts = _fd_weights_5(n, i, h)
        du = _loop_comb([frame_grid.U[i + o][i + o] for o in offs], wts)
        eta = (frame_grid.U[i][i].dagger() * du).truncated(*band)
        samples.append(_project_twisted_su(eta.coeffs, band[0]))
    data = np.stack(samples)
    splines = CubicSpline(x, data.reshape(n, -1))

    def eta(t):
        return LaurentLoop(splines(t).reshape(-1, 2, 2), band[0])

    dom = (float(x[0]), float(x[-1]))
    return PotentialPair(eta_x=eta, eta_y=eta, kind="generalized",
                         domain_x=dom, domain_y=dom,
                         meta={"source": "diagonal_restriction"})


def _loop_comb(loops, weights):
    acc = loops[0].scaled(weights[0])
    for q, w in zip(loops[1:], weights[1:]):
        acc = acc + q.scaled(w)
    return acc


# -- catalogue / ingestion -----------------------------------------------------

def soliton_alpha(x):
    return 4.0 * np.arctan(np.exp(x)) - np.pi


def soliton_beta(y):
    return 4.0 * np.arctan(np.exp(y))


def zero_angle(t):
    return np.zeros_like(np.asarray(t, dtype=float))


BUILTIN_FUNCTIONS = {
    "zero": zero_angle,
    "soliton_alpha": soliton_alpha,
    "soliton_beta": soliton_beta,
}


def function_from_table(path):
    """Cubic-spline interpolant of a two-column t,value CSV (header required)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if any(ch.isdigit() for ch in header.split(",")[0]):
            raise ValueError(f"{path}: header row 't,value' is required")
        data = np.loadtxt(fh, delimiter=",")
    if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] < 4:
        raise ValueError(f"{path}: need two columns and at least 4 rows")
    return CubicSpline(data[:, 0], data[:, 1])

"""Moving-frame integration.

integrate_axis advances dG/dt = G eta(t) directly on Laurent coefficients,
so a single integration serves every lambda.  direct_frame_solve integrates
the frame system at one fixed lambda given an angle grid; it is the
loop-group-free cross check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from psurf.loops import LaurentLoop, unitarity_defect

DRIFT_LIMIT = 1e-6


class IntegrationDrift(RuntimeError):
    """Unitarity drift exceeded the limit; a smaller step is needed."""


@dataclass(frozen=True)
class AxisFramePath:
    """Frames G(t) at the requested parameter values along one axis."""

    axis: str
    t: np.ndarray
    frames: list
    step: float
    init: LaurentLoop
    drift: float = 0.0
    tail_norm: float = 0.0

    def frame_at(self, t_value):
        idx = int(np.argmin(np.abs(self.t - t_value)))
        if abs(self.t[idx] - t_value) > 1e-12 * (1.0 + abs(t_value)):
            raise KeyError(f"parameter {t_value} was not a requested sample")
        return self.frames[idx]


def _rk4_step(g, eta, t, h, band):
    k1 = (g * eta(t)).truncated(*band)
    g2 = g + (0.5 * h) * k1
    k2 = (g2 * eta(t + 0.5 * h)).truncated(*band)
    g3 = g + (0.5 * h) * k2
    k3 = (g3 * eta(t + 0.5 * h)).truncated(*band)
    g4 = g + h * k3
    k4 = (g4 * eta(t + h)).truncated(*band)
    return g + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _march(eta, t_from, targets, init, step, band):
    """Integrate from t_from through the sorted targets; yields (t, G)."""
    out = []
    g = init
    t = t_from
    for t_next in targets:
        gap = t_next - t
        if abs(gap) > 0:
            nsub = max(1, int(np.ceil(abs(gap) / step)))
            h = gap / nsub
            for _ in range(nsub):
                g = _rk4_step(g, eta, t, h, band)
                t = t + h
        t = t_next
        out.append((t, g))
    return out


def integrate_axis(eta, t_values, init=None, step=None, band=None, axis="x",
                   t0=None, drift_limit=DRIFT_LIMIT, drift_samples=(0.5, 1.0, 2.0)):
    """Classical 4th-order integration of dG/dt = G eta(t) on a degree band.

    t_values are the parameters at which frames are recorded; t0 is the
    anchor where G equals init (defaults to the first t_value, or 0.0 if it
    lies inside the range).  Integration runs in both directions from the
    anchor when needed.  Unitarity is monitored, not enforced; for loops
    whose band converges only on the unit circle, restrict drift_samples
    accordingly (evaluation away from |lambda| = 1 amplifies the truncated
    tail exponentially).
    """
    t_values = np.asarray(t_values, dtype=float)
    if t_values.ndim != 1 or t_values.size == 0:
        raise ValueError("need a nonempty 1-d array of parameters")
    if np.any(np.diff(t_values) <= 0):
        raise ValueError("parameters must be strictly increasing")
    if init is None:
        init = LaurentLoop.identity()
    if t0 is None:
        t0 = 0.0 if t_values[0] <= 0.0 <= t_values[-1] else float(t_values[0])
    if step is None:
        span = max(t_values[-1] - t_values[0], abs(t_values[0] - t0),
                   abs(t_values[-1] - t0))
        step = max(span, 1e-12) / 256.0
    if band is None:
        probe = eta(t0)
        band = (min(0, 24 * probe.d_min), max(0, 24 * probe.d_max))
    init_b = init.truncated(*band)

    frames = {}
    above = t_values[t_values >= t0 - 1e-15]
    below = t_values[t_values < t0 - 1e-15][::-1]
    for t, g in _march(eta, t0, above, init_b, step, band):
        frames[float(t)] = g
    for t, g in _march(eta, t0, below, init_b, step, band):
        frames[float(t)] = g

    ordered = [frames[float(t)] for t in t_values]
    drift = 0.0
    span = max(1.0, float(t_values[-1] - t_values[0]))
    for g in (ordered[0], ordered[len(ordered) // 2], ordered[-1]):
        u_def, det_def = unitarity_defect(g, samples=drift_samples)
        drift = max(drift, u_def, det_def)
    if drift > drift_limit * span:
        raise IntegrationDrift(
            f"unitarity drift {drift:.3g} over span {span:.3g}; reduce the step")
    tail = max(_edge_norm(g, band) for g in (ordered[0], ordered[-1]))
    return AxisFramePath(axis=axis, t=t_values, frames=ordered, step=float(step),
                         init=init, drift=float(drift), tail_norm=float(tail))


def _edge_norm(g, band):
    lo, hi = band
    tips = [g.coeff(hi), g.coeff(hi - 1)] if hi > 0 else []
    tips += [g.coeff(lo), g.coeff(lo + 1)] if lo < 0 else []
    if not tips:
        return 0.0
    return float(max(np.linalg.norm(t) for t in tips))


# -- fixed-lambda direct solve ----------------------------------------------


def _phi_model(phi, x, y):
    """Normalize phi input to callables (phi, phi_x) on the grid rectangle."""
    if callable(phi):
        fn = phi
        h = 1e-6 * max(x[-1] - x[0], 1.0)

        def fn_x(xv, yv):
            return (fn(xv + h, yv) - fn(xv - h, yv)) / (2.0 * h)

        return fn, fn_x
    arr = np.asarray(phi, dtype=float)
    if arr.shape != (x.size, y.size):
        raise ValueError("phi grid must have shape (nx, ny)")
    row_splines = [CubicSpline(x, arr[:, j]) for j in range(y.size)]
    col_splines = [CubicSpline(y, arr[i, :]) for i in range(x.size)]

    def fn(xv, yv):
        j = int(np.argmin(np.abs(y - yv)))
        if abs(y[j] - yv) < 1e-12:
            return float(row_splines[j](xv))
        i = int(np.argmin(np.abs(x - xv)))
        return float(col_splines[i](yv))

    def fn_x(xv, yv):
        j = int(np.argmin(np.abs(y - yv)))
        return float(row_splines[j](xv, 1))

    return fn, fn_x


def _x_coefficient(phi_x, a_val, lam):
    return 0.5j * np.array([[-phi_x, a_val * lam], [a_val * lam, phi_x]])


def _y_coefficient(phi, b_val, lam):
    e = np.exp(1j * phi)
    return (-0.5j * b_val / lam) * np.array([[0.0, e], [np.conj(e), 0.0]])


def _rk4_matrix(u, coef, t, h):
    k1 = u @ coef(t)
    k2 = (u + 0.5 * h * k1) @ coef(t + 0.5 * h)
    k3 = (u + 0.5 * h * k2) @ coef(t + 0.5 * h)
    k4 = (u + h * k3) @ coef(t + h)
    return u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _sweep(u0, coef, ts, substeps):
    u = u0
    for t0, t1 in zip(ts[:-1], ts[1:]):
        h = (t1 - t0) / substeps
        t = t0
        for _ in range(substeps):
            u = _rk4_matrix(u, coef, t, h)
            t += h
    return u


def direct_frame_solve(phi, a, b, lam0, x, y, phi_x=None, substeps=2, init=None):
    """Integrate the fixed-lambda frame system over the grid, given the angle.

    phi may be an (nx, ny) array (splined along rows/columns) or a callable
    phi(x, y); phi_x optionally supplies the exact x-derivative.  Returns
    (U grid, path-independence residual at the far corner).  A large
    residual signals that phi is not a sine-Gordon solution at this
    resolution.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a_fn = a if callable(a) else (lambda t, _v=float(a): _v + 0.0 * np.asarray(t))
    b_fn = b if callable(b) else (lambda t, _v=float(b): _v + 0.0 * np.asarray(t))
    fn, fn_x_default = _phi_model(phi, x, y)
    fn_x = phi_x if phi_x is not None else fn_x_default
    if init is None:
        init = np.eye(2, dtype=complex)

    nx, ny = x.size, y.size
    u = np.empty((nx, ny, 2, 2), dtype=complex)

    # bottom row along x, then every column along y
    def coef_x(yv):
        return lambda t: _x_coefficient(fn_x(t, yv), float(a_fn(t)), lam0)

    def coef_y(xv):
        return lambda t: _y_coefficient(fn(xv, t), float(b_fn(t)), lam0)

    u[0, 0] = init
    row_coef = coef_x(y[0])
    for i in range(nx - 1):
        u[i + 1, 0] = _sweep(u[i, 0], row_coef, x[i:i + 2], substeps)
    for i in range(nx):
        ci = coef_y(x[i])
        for j in range(ny - 1):
            u[i, j + 1] = _sweep(u[i, j], ci, y[j:j + 2], substeps)

    # other path: up the left column, then along the top row
    u_alt = init
    c0 = coef_y(x[0])
    for j in range(ny - 1):
        u_alt = _sweep(u_alt, c0, y[j:j + 2], substeps)
    top_coef = coef_x(y[-1])
    for i in range(nx - 1):
        u_alt = _sweep(u_alt, top_coef, x[i:i + 2], substeps)

    residual = float(np.max(np.abs(u[-1, -1] - u_alt)))
    return u, residual

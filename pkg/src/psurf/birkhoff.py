"""Numerical Birkhoff factorization of twisted loops.

The factorization identity is expanded in powers of lambda; the unknown
star-normalized factor's coefficients solve a block-Toeplitz least-squares
system built from the input coefficients.  The other factor comes out as an
exact banded product.  Residuals are measured on a fixed circle/radial
sample set and truncation is widened adaptively when the retained tail of
the solved factor is not negligible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from psurf.loops import LaurentLoop, inverse_one_sided

DEFAULT_TRUNC = 24
MAX_TRUNC = 96
TAIL_TOL = 1e-8
RESIDUAL_TOL = 1e-6

# residual sample set: tangential (unit circle) plus radial probes
_CIRCLE = np.exp(2j * np.pi * np.arange(64) / 64.0)
_RADIAL = np.array([0.5 + 0j, 2.0 + 0j])
RESIDUAL_SAMPLES = np.concatenate([_CIRCLE, _RADIAL])


def _residual_samples(g):
    """Circle samples, plus the radial probes when the input band is
    radially converged (otherwise 2^degree amplification of the retained
    tail would swamp the factorization error)."""
    amp = 0.0
    if g.d_max > 0:
        amp = max(amp, float(np.linalg.norm(g.coeff(g.d_max))) * 2.0 ** g.d_max)
    if g.d_min < 0:
        amp = max(amp, float(np.linalg.norm(g.coeff(g.d_min))) * 2.0 ** (-g.d_min))
    if amp < 1e-9 * max(1.0, g.max_coeff_norm()):
        return RESIDUAL_SAMPLES
    return _CIRCLE


class FactorizationFailure(RuntimeError):
    """Splitting left the numerically resolvable regime.

    For these unitary-valued twisted loops the factorization always exists,
    so failure signals truncation or conditioning trouble, not a geometric
    obstruction.  The offending residual and tail norm are attached.
    """

    def __init__(self, message, residual=None, tail_norm=None):
        super().__init__(message)
        self.residual = residual
        self.tail_norm = tail_norm


@dataclass(frozen=True)
class SplitResult:
    plus: LaurentLoop
    minus: LaurentLoop
    residual: float
    tail_norm: float


def _solve_plus_star(g, n):
    """h in Lambda^+_* (support 0..n, h_0 = I) minimizing the positive-degree
    coefficients of h*g; returns h or None on a singular solve."""
    j_max = n + g.d_max
    if j_max < 1:
        return LaurentLoop.identity()
    # P[k-1, j-1] = c_{j-k}, k = 1..n, j = 1..j_max
    c = g.coeffs
    ks = np.arange(1, n + 1)
    js = np.arange(1, j_max + 1)
    idx = js[None, :] - ks[:, None] - g.d_min
    valid = (idx >= 0) & (idx < c.shape[0])
    blocks = np.zeros((n, j_max, 2, 2), dtype=complex)
    blocks[valid] = c[idx[valid]]
    # rows of h decouple: solve B^T x^T = r^T with two right-hand sides
    mat = blocks.transpose(0, 2, 1, 3).reshape(2 * n, 2 * j_max).T
    rhs_idx = js - g.d_min
    rvalid = (rhs_idx >= 0) & (rhs_idx < c.shape[0])
    rhs_blocks = np.zeros((j_max, 2, 2), dtype=complex)
    rhs_blocks[rvalid] = c[rhs_idx[rvalid]]
    rhs = -rhs_blocks.transpose(0, 2, 1).reshape(2 * j_max, 2)
    try:
        sol, *_ = np.linalg.lstsq(mat, rhs, rcond=None)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(sol)):
        return None
    coeffs = np.zeros((n + 1, 2, 2), dtype=complex)
    coeffs[0] = np.eye(2)
    coeffs[1:] = sol.reshape(n, 2, 2).transpose(0, 2, 1)
    return LaurentLoop(coeffs, 0, copy=False)


def _eval_norm(loops_and_signs, samples=RESIDUAL_SAMPLES):
    acc = None
    for sign, loop in loops_and_signs:
        v = sign * loop.evaluate(samples)
        acc = v if acc is None else acc + v
    return float(np.max(np.abs(acc)))


def _tail(loop, side):
    """Norm of the two extreme retained coefficients on the truncated side."""
    if side == "+":
        tips = [loop.coeff(loop.d_max), loop.coeff(loop.d_max - 1)]
    else:
        tips = [loop.coeff(loop.d_min), loop.coeff(loop.d_min + 1)]
    return float(max(np.linalg.norm(t) for t in tips))


def _trunc_schedule(trunc):
    n = trunc
    while True:
        yield n
        if n >= MAX_TRUNC:
            return
        n = min(2 * n, MAX_TRUNC)


def split_plus_star_minus(g, trunc=DEFAULT_TRUNC, residual_tol=RESIDUAL_TOL,
                          tail_tol=TAIL_TOL):
    """g = plus * minus with plus in Lambda^+_* (lambda^0 = I), minus in Lambda^-."""
    last = (np.inf, np.inf)
    for n in _trunc_schedule(trunc):
        h = _solve_plus_star(g, n)
        if h is None:
            continue
        plus_full = inverse_one_sided(h, n)
        tail = _tail(plus_full, "+")
        # trim at the numerical noise floor: the radial residual samples
        # amplify degree-k content by 2^k, so roundoff-level coefficients in
        # the solved factor must not be carried around
        plus = plus_full.trim()
        minus = (h * g).truncated(min(g.d_min, 0), 0).trim()
        residual = _eval_norm([(1.0, g), (-1.0, plus * minus)], _residual_samples(g))
        if residual <= residual_tol and tail <= tail_tol:
            return SplitResult(plus, minus, residual, tail)
        last = (residual, tail)
    raise FactorizationFailure(
        f"plus*minus splitting did not resolve (residual {last[0]:.3g}, tail {last[1]:.3g})",
        residual=last[0], tail_norm=last[1])


def split_minus_star_plus(g, trunc=DEFAULT_TRUNC, residual_tol=RESIDUAL_TOL,
                          tail_tol=TAIL_TOL):
    """g = minus * plus with minus in Lambda^-_* (lambda^0 = I), plus in Lambda^+.

    Reduced to the plus-star case by the lambda -> 1/lambda reflection.
    """
    r = split_plus_star_minus(g.reflect(), trunc, residual_tol, tail_tol)
    return SplitResult(plus=r.minus.reflect(), minus=r.plus.reflect(),
                       residual=r.residual, tail_norm=r.tail_norm)


def split_plus_minusfree(g, trunc=DEFAULT_TRUNC, residual_tol=RESIDUAL_TOL,
                         tail_tol=TAIL_TOL):
    """g = plus * minus_star^{-1} with minus_star in Lambda^-_*, plus in Lambda^+.

    This is the splitting shape used by the frame reconstruction: the
    right factor is the star-normalized minus loop itself (not inverted),
    so the returned pair satisfies g * minus_star = plus up to the residual.
    """
    last = (np.inf, np.inf)
    for n in _trunc_schedule(trunc):
        # right-multiplied unknown: transpose reduces to the left solver
        h = _solve_plus_star(g.transpose_loop().reflect(), n)
        if h is None:
            continue
        t_full = h.transpose_loop().reflect()  # Lambda^-_*, support -n..0
        tail = _tail(t_full, "-")
        t_minus = t_full.trim()
        prod = g * t_minus
        plus = prod.truncated(0, max(prod.d_max, 0)).trim()
        samples = _residual_samples(g)
        gv = g.evaluate(samples)
        pv = plus.evaluate(samples)
        tv = t_minus.evaluate(samples)
        residual = float(np.max(np.abs(gv - pv @ np.linalg.inv(tv))))
        if residual <= residual_tol and tail <= tail_tol:
            return SplitResult(plus=plus, minus=t_minus, residual=residual,
                               tail_norm=tail)
        last = (residual, tail)
    raise FactorizationFailure(
        f"plus*minus_star^-1 splitting did not resolve (residual {last[0]:.3g}, tail {last[1]:.3g})",
        residual=last[0], tail_norm=last[1])

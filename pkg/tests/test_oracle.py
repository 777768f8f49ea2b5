import numpy as np
import pytest

from psurf.oracle import (GoursatProblem, RegistrationError, StiffnessError,
                          goursat_solve, register_rigid)
from tests.conftest import kink_phi


def test_zero_data_stays_zero():
    x = np.linspace(0, 1, 17)
    phi = goursat_solve(GoursatProblem(x, x, np.zeros(17), np.zeros(17)))
    assert np.max(np.abs(phi)) == 0.0


def test_pi_equilibrium():
    x = np.linspace(0, 1, 17)
    phi = goursat_solve(GoursatProblem(x, x, np.full(17, np.pi), np.full(17, np.pi)))
    assert np.max(np.abs(phi - np.pi)) < 1e-12


def test_soliton_convergence():
    errs = []
    for n in (65, 129):
        x = np.linspace(0, 1, n)
        prob = GoursatProblem(x, x, kink_phi(x, 0.0), kink_phi(0.0, x))
        phi = goursat_solve(prob)
        errs.append(np.max(np.abs(phi - kink_phi(x[:, None], x[None, :]))))
    order = np.log2(errs[0] / errs[1])
    assert 1.8 <= order <= 2.2
    assert errs[1] < 1e-5          # 128 cells per axis on the unit square


def test_kink_satisfies_sine_gordon():
    # the closed form used as oracle anchor: phi_xy = 4E(1-E^2)/(1+E^2)^2 = sin phi
    s = np.linspace(-1, 3, 101)
    e = np.exp(s)
    lhs = 4 * e * (1 - e ** 2) / (1 + e ** 2) ** 2
    assert np.max(np.abs(lhs - np.sin(4 * np.arctan(e)))) < 1e-14


def test_corner_mismatch_rejected():
    x = np.linspace(0, 1, 9)
    with pytest.raises(ValueError, match="corner"):
        GoursatProblem(x, x, np.zeros(9), np.full(9, 0.1))


def test_stiff_cell_raises():
    x = np.linspace(0, 40, 3)    # q = (20*20) >> 1 breaks the contraction
    with pytest.raises(StiffnessError):
        goursat_solve(GoursatProblem(x, x, np.full(3, 0.5), np.full(3, 0.5)))


def test_register_identity():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((40, 3))
    r, t, rms = register_rigid(a, a)
    assert np.allclose(r, np.eye(3), atol=1e-12)
    assert np.max(np.abs(t)) < 1e-12 and rms < 1e-12


def test_register_recovers_motion():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((60, 3))
    th = 0.7
    r_true = np.array([[np.cos(th), -np.sin(th), 0], [np.sin(th), np.cos(th), 0], [0, 0, 1.0]])
    t_true = np.array([0.3, -1.2, 2.0])
    b = a @ r_true.T + t_true
    r, t, rms = register_rigid(a, b)
    assert np.max(np.abs(r - r_true)) < 1e-10
    assert np.max(np.abs(t - t_true)) < 1e-10
    assert rms < 1e-12
    assert abs(np.linalg.det(r) - 1.0) < 1e-12


def test_register_proper_even_under_reflection():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((50, 3))
    b = a.copy()
    b[:, 2] *= -1.0              # improper target: best proper fit has det +1
    r, t, rms = register_rigid(a, b)
    assert abs(np.linalg.det(r) - 1.0) < 1e-12


def test_register_rms_invariant_under_common_motion():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((30, 3))
    b = a + 0.01 * rng.standard_normal((30, 3))
    _, _, rms1 = register_rigid(a, b)
    th = 1.1
    q = np.array([[1, 0, 0], [0, np.cos(th), -np.sin(th)], [0, np.sin(th), np.cos(th)]])
    shift = np.array([5.0, -2.0, 0.5])
    _, _, rms2 = register_rigid(a @ q.T + shift, b @ q.T + shift)
    assert abs(rms1 - rms2) < 1e-12


def test_register_rejects_degenerate_sets():
    line = np.outer(np.linspace(0, 1, 10), np.array([1.0, 2.0, 3.0]))
    with pytest.raises(RegistrationError):
        register_rigid(line, line)
    with pytest.raises(RegistrationError):
        register_rigid(np.zeros((2, 3)), np.zeros((2, 3)))

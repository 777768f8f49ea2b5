import numpy as np
import pytest

from psurf.loops import LaurentLoop, exp_loop, unitarity_defect
from psurf.potentials import (AMSLER_GAMMA_POLE, BoundaryAngles, amsler_dgamma,
                              amsler_gamma, cayley, check_equivariance,
                              extract_diagonal_potentials, function_from_table,
                              gauge_transform, generalized_amsler_example,
                              normalized_from_boundary, soliton_alpha,
                              soliton_beta, stretched_from_boundary,
                              x_axis_data, y_axis_data)

ZETA = np.array([[0.0, 0.3j], [0.3j, 0.0]])


def soliton_bnd():
    return BoundaryAngles(alpha=soliton_alpha, beta=soliton_beta)


def test_normalized_structure():
    pair = normalized_from_boundary(soliton_bnd(), (0, 1), (0, 1))
    ex = pair.eta_x(0.3)
    assert (ex.d_min, ex.d_max) == (1, 1)
    ey = pair.eta_y(0.6)
    assert (ey.d_min, ey.d_max) == (-1, -1)
    a = soliton_alpha(0.3)
    expect = 0.5j * np.array([[0, np.exp(-1j * a)], [np.exp(1j * a), 0]])
    assert np.max(np.abs(ex.coeff(1) - expect)) < 1e-15
    b = soliton_beta(0.6)
    expect_y = -0.5j * np.array([[0, np.exp(1j * b)], [np.exp(-1j * b), 0]])
    assert np.max(np.abs(ey.coeff(-1) - expect_y)) < 1e-15


def test_normalized_zero_angles():
    pair = normalized_from_boundary(
        BoundaryAngles(alpha=lambda t: 0.0 * np.asarray(t), beta=lambda t: 0.0 * np.asarray(t)))
    assert np.max(np.abs(pair.eta_x(0.7).coeff(1) - 0.5j * np.array([[0, 1], [1, 0]]))) < 1e-15
    assert np.max(np.abs(pair.eta_y(0.2).coeff(-1) + 0.5j * np.array([[0, 1], [1, 0]]))) < 1e-15


def test_normalized_requires_alpha_zero():
    with pytest.raises(ValueError, match="alpha"):
        normalized_from_boundary(BoundaryAngles(alpha=lambda t: t + 1.0, beta=soliton_beta))


def test_normalized_rejects_speeds():
    bnd = BoundaryAngles(alpha=soliton_alpha, beta=soliton_beta, a=lambda t: 2.0 + 0 * t)
    with pytest.raises(ValueError, match="unit speeds"):
        normalized_from_boundary(bnd)


def test_skew_hermitian_on_real_axis():
    pair = normalized_from_boundary(soliton_bnd(), (0, 1), (0, 1))
    for t in np.linspace(0, 1, 7):
        for lam in (0.25, 1.0, 3.0):
            v = pair.eta_x(t).evaluate(lam)
            assert np.max(np.abs(v + np.conj(v.T))) < 1e-12
            w = pair.eta_y(t).evaluate(lam)
            assert np.max(np.abs(w + np.conj(w.T))) < 1e-12
        assert pair.eta_x(t).check_twist() < 1e-14


def test_axis_data_roundtrip():
    pair = normalized_from_boundary(soliton_bnd(), (0, 1), (0, 1))
    a_fn, alpha_fn = x_axis_data(pair)
    b_fn, beta_fn = y_axis_data(pair)
    ts = np.linspace(0, 1, 11)
    assert np.max(np.abs(a_fn(ts) - 1.0)) < 1e-12
    assert np.max(np.abs(alpha_fn(0.37) - soliton_alpha(0.37))) < 1e-12
    assert np.max(np.abs(beta_fn(0.81) - soliton_beta(0.81))) < 1e-12


def test_stretched_pair_carries_speeds():
    bnd = BoundaryAngles(alpha=soliton_alpha, beta=soliton_beta,
                         a=lambda t: 2.0 + 0.0 * np.asarray(t),
                         b=lambda t: 0.5 + 0.0 * np.asarray(t))
    pair = stretched_from_boundary(bnd, (0, 1), (0, 1))
    assert pair.kind == "generalized"
    a_fn, alpha_fn = x_axis_data(pair)
    assert abs(float(a_fn(0.3)) - 2.0) < 1e-12
    assert abs(float(alpha_fn(0.3)) - soliton_alpha(0.3)) < 1e-10


def test_gauge_identity_is_noop():
    pair = normalized_from_boundary(soliton_bnd(), (0, 1), (0, 1))
    gauged = gauge_transform(pair)
    for t in (0.1, 0.9):
        assert ((gauged.eta_x(t) - pair.eta_x(t)).max_coeff_norm()) < 1e-13
        assert ((gauged.eta_y(t) - pair.eta_y(t)).max_coeff_norm()) < 1e-13


def test_gauge_constant_diagonal_conjugates():
    pair = normalized_from_boundary(soliton_bnd(), (0, 1), (0, 1))
    d = LaurentLoop.constant(np.diag([np.exp(0.3j), np.exp(-0.3j)]))
    gauged = gauge_transform(pair, qx=d)
    t = 0.4
    expect = np.conj(d.coeff(0).T) @ pair.eta_x(t).coeff(1) @ d.coeff(0)
    assert np.max(np.abs(gauged.eta_x(t).coeff(1) - expect)) < 1e-14
    assert gauged.kind == "generalized"


def test_gauge_rejects_wrong_side():
    pair = normalized_from_boundary(soliton_bnd(), (0, 1), (0, 1))
    plus_loop = exp_loop(LaurentLoop.from_terms({1: ZETA}), (0, 12))
    with pytest.raises(ValueError, match="minus"):
        gauge_transform(pair, qx=plus_loop)
    with pytest.raises(ValueError, match="plus"):
        gauge_transform(pair, qy=plus_loop.reflect())


def test_gauge_rejects_nonunitary():
    pair = normalized_from_boundary(soliton_bnd(), (0, 1), (0, 1))
    bad = LaurentLoop.constant(1.2 * np.eye(2))
    with pytest.raises(ValueError, match="unitary"):
        gauge_transform(pair, qx=bad)


def test_gauge_cocycle():
    pair = normalized_from_boundary(soliton_bnd(), (0, 1), (0, 1))

    def q1(x):
        return exp_loop(LaurentLoop.from_terms({-1: np.sin(x) * ZETA}), (-16, 0))

    def q2(x):
        return exp_loop(LaurentLoop.from_terms({-2: (0.2 * x * x) * 1j * np.diag([1.0, -1.0])}), (-16, 0))

    both = gauge_transform(gauge_transform(pair, qx=q1), qx=q2)
    combined = gauge_transform(pair, qx=lambda x: q1(x) * q2(x))
    for t in (0.2, 0.8):
        diff = (both.eta_x(t) - combined.eta_x(t)).truncated(-8, 1)
        assert diff.max_coeff_norm() < 1e-8


def test_equivariance_trivial_and_shift():
    pair = normalized_from_boundary(soliton_bnd(), (0, 1), (0, 1))
    ident = lambda t: t
    rx, ry = check_equivariance(pair, ident, ident, None, None,
                                dgamma1=lambda t: 1.0, dgamma2=lambda t: 1.0)
    assert rx == 0.0 and ry == 0.0
    rx, _ = check_equivariance(pair, lambda t: t + 0.2, ident, None, None,
                               dgamma1=lambda t: 1.0, dgamma2=lambda t: 1.0,
                               sample_x=(0.0, 0.7))
    assert rx > 1e-3


def test_equivariance_rejects_critical_gamma():
    pair = normalized_from_boundary(soliton_bnd(), (0, 1), (0, 1))
    with pytest.raises(ValueError, match="derivative"):
        check_equivariance(pair, lambda t: t ** 2, lambda t: t, None, None,
                           sample_x=(0.0, 1.0))


def test_cayley_maps_line_to_circle():
    ts = np.linspace(-40, 40, 100)
    assert np.max(np.abs(np.abs(cayley(ts)) - 1.0)) < 1e-12


def test_amsler_structure_and_equivariance():
    pair, desc = generalized_amsler_example(domain=(-4.0, 4.0))
    loop = pair.eta_x(0.5)
    assert loop.check_twist() == 0.0
    assert (loop.d_min, loop.d_max) == (-1, 1)
    assert np.max(np.abs(loop.coeff(1) - loop.coeff(-1))) < 1e-15
    assert abs(loop.coeff(0)).max() < 1e-15
    for lam in (0.5, 1.0, 2.0):
        v = loop.evaluate(lam)
        assert np.max(np.abs(v + np.conj(v.T))) < 1e-13
    window = (-4.0, 0.28)   # gamma stays finite left of the pulled-back pole
    assert window[1] < AMSLER_GAMMA_POLE
    rx, ry = check_equivariance(pair, desc.gamma1, desc.gamma2, desc.wx, desc.wy,
                                dgamma1=desc.dgamma1, dgamma2=desc.dgamma2,
                                sample_x=window, sample_y=window)
    assert rx < 1e-8 and ry < 1e-8


def test_amsler_gamma_is_conjugated_rotation():
    mu = np.exp(2j * np.pi / 3)
    for t in (-2.0, -0.3, 0.1):
        w = cayley(amsler_gamma(t))
        assert abs(w - mu * cayley(t)) < 1e-12
    h = 1e-6
    fd = (amsler_gamma(0.2 + h) - amsler_gamma(0.2 - h)) / (2 * h)
    assert abs(fd - amsler_dgamma(0.2)) < 1e-8


def test_perturbed_amsler_breaks_equivariance():
    pair, desc = generalized_amsler_example(domain=(-4.0, 4.0))
    from psurf.potentials import _amsler_p, _offdiag

    def eta_bad(t):
        m = _offdiag(complex(_amsler_p(t)) + 0.1)
        return LaurentLoop.from_terms({1: m, -1: m})

    from dataclasses import replace
    bad = replace(pair, eta_x=eta_bad, eta_y=eta_bad)
    rx, ry = check_equivariance(bad, desc.gamma1, desc.gamma2, desc.wx, desc.wy,
                                dgamma1=desc.dgamma1, dgamma2=desc.dgamma2,
                                sample_x=(-4.0, 0.28), sample_y=(-4.0, 0.28))
    assert rx > 1e-3 and ry > 1e-3


def test_diagonal_extraction_requires_square_uniform(soliton_frames_small):
    from psurf.surface import reconstruct_frames
    pair = soliton_frames_small.pair
    xs = np.linspace(0, 1, 9)
    ys = np.linspace(0, 0.5, 9)
    bad = reconstruct_frames(pair, xs, ys, trunc=16)
    with pytest.raises(ValueError, match="square"):
        extract_diagonal_potentials(bad)


def test_diagonal_extraction_structure(soliton_frames_small):
    p = extract_diagonal_potentials(soliton_frames_small)
    loop = p.eta_x(0.5)
    assert (loop.d_min, loop.d_max) == (-1, 1)
    assert loop.check_twist() < 1e-14
    v = loop.evaluate(1.3)
    assert np.max(np.abs(v + np.conj(v.T))) < 1e-12
    assert p.eta_x is p.eta_y


def test_table_ingestion(tmp_path):
    ts = np.linspace(0, 1, 21)
    path = tmp_path / "alpha.csv"
    rows = "\n".join("%.17g,%.17g" % (t, np.sin(2 * t)) for t in ts)
    path.write_text("t,value\n" + rows + "\n")
    fn = function_from_table(str(path))
    assert abs(fn(0.5) - np.sin(1.0)) < 1e-6
    bad = tmp_path / "bad.csv"
    bad.write_text("0,0\n1,1\n")
    with pytest.raises(ValueError, match="header"):
        function_from_table(str(bad))

import math

import numpy as np
import pytest

from weylcert.criterion import (
    PowerSpec,
    boundary_criterion,
    certify_sup_l1,
    residual_l2,
    weyl_matrix_check,
)
from weylcert.errors import InapplicableError, InputError, ParameterError
from weylcert.manifold import euclidean_profile, make_manifold
from weylcert.testfunctions import (
    CutoffSpec,
    DefectNorms,
    build_phase_testfn,
    build_tent_testfn,
    defect_norms,
)


def euclid2():
    return make_manifold(euclidean_profile(), 2)


# -- interval criteria --------------------------------------------------------


def test_epsilon_formula_recomputed():
    n = DefectNorms(sup_norm=1.0, l1_defect=3.0, l2_sq=1000.0, l2_defect=0.2)
    for lam in (0.0, 0.5, 2.0):
        rep = certify_sup_l1(n, lam, essential_flag=False)
        assert rep.sigma == pytest.approx(3.0 / 1000.0, rel=1e-15)
        assert rep.epsilon == min(1.0, (lam + 1.0) * rep.sigma ** (1.0 / 3.0))
        assert rep.interval == (lam - rep.epsilon, lam + rep.epsilon)
        assert rep.method == "sup_l1"
        assert rep.proof_side_bound >= rep.sigma

    rep = residual_l2(n, 1.0)
    sigma = 0.2 / math.sqrt(1000.0)
    assert rep.sigma == pytest.approx(sigma, rel=1e-15)
    assert rep.epsilon == rep.sigma
    assert rep.method == "residual_l2"


def test_zero_sigma_rejected():
    n = DefectNorms(sup_norm=1.0, l1_defect=0.0, l2_sq=1.0, l2_defect=0.0)
    with pytest.raises(InputError):
        certify_sup_l1(n, 1.0, essential_flag=False)


def test_negative_lambda_rejected():
    n = DefectNorms(sup_norm=1.0, l1_defect=1.0, l2_sq=1.0, l2_defect=1.0)
    with pytest.raises(ParameterError):
        certify_sup_l1(n, -1.0, essential_flag=False)


def test_boundary_criterion_reference_tent():
    M = euclid2()
    tf = build_tent_testfn(M, 100.0, 50.0)
    rep = boundary_criterion(M, tf, 0.0)
    assert rep.sigma == pytest.approx(4.2e-3, rel=1e-6)
    assert rep.epsilon == pytest.approx(4.2e-3 ** (1.0 / 3.0), rel=1e-6)
    assert rep.method == "boundary"


def test_boundary_rejects_smooth_function():
    M = euclid2()
    spec = CutoffSpec(x=25.0, y=120.0, R=10.0)
    tf = build_phase_testfn(M, 1.0, spec)
    with pytest.raises(InputError):
        boundary_criterion(M, tf, 1.0)


def test_residual_inapplicable_on_tent():
    M = euclid2()
    tf = build_tent_testfn(M, 100.0, 50.0)
    n = defect_norms(M, tf)
    with pytest.raises(InapplicableError):
        residual_l2(n, 0.0)


def test_l1_criterion_dominance():
    # Cauchy-Schwarz direction: sigma_sup_l1 <= sigma_residual * sqrt(vol(supp))
    # * sup_norm / sqrt(l2_sq)
    M = euclid2()
    spec = CutoffSpec(x=25.0, y=120.0, R=10.0)
    lam = 1.0
    tf = build_phase_testfn(M, lam, spec)
    n = defect_norms(M, tf)
    a = certify_sup_l1(n, lam, essential_flag=False)
    b = residual_l2(n, lam)
    from weylcert.manifold import volume_area

    vol = volume_area(M, tf.support[1])[0] - volume_area(M, tf.support[0])[0]
    bound = b.sigma * math.sqrt(vol) * n.sup_norm / math.sqrt(n.l2_sq)
    assert a.sigma <= bound * (1.0 + 1e-8)


def test_report_json_clips_interval():
    n = DefectNorms(sup_norm=1.0, l1_defect=3.0, l2_sq=10.0, l2_defect=1.0)
    rep = certify_sup_l1(n, 0.1, essential_flag=True)
    j = rep.to_json()
    assert j["interval"][0] >= 0.0
    assert j["essential"] is True
    assert set(j) >= {"lambda", "sigma", "epsilon", "interval", "method"}


# -- matrix-level checks ------------------------------------------------------


def test_exact_eigenvector_diag():
    H = np.diag([0.0, 1.0, 2.0])
    psi = np.array([0.0, 1.0, 0.0])
    rep = weyl_matrix_check(H, psi, 1.0)
    assert abs(rep.q_lin) <= 1e-14
    assert rep.q_f <= 1e-14
    assert rep.psi_norm == pytest.approx(1.0, abs=1e-12)


def test_two_level_gap_example():
    H = np.diag([0.0, 2.0])
    psi = np.array([1.0, 1.0]) / math.sqrt(2.0)
    rep = weyl_matrix_check(H, psi, 1.0)
    assert abs(rep.q_lin) <= 1e-14
    assert rep.q_f == pytest.approx(2.0 / 3.0, abs=1e-12)


def test_tridiagonal_gap_instance():
    H = np.array([[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]])
    psi = np.array([1.0, 0.0, 0.0])
    rep = weyl_matrix_check(H, psi, 2.0)
    assert abs(rep.q_lin) <= 1e-14
    assert rep.q_f > 1e-3


def test_eigenpair_necessity_random():
    rng = np.random.default_rng(11)
    for _ in range(60):
        m = int(rng.integers(2, 10))
        B = rng.normal(size=(m, m))
        H = B @ B.T  # symmetric PSD
        evals, vecs = np.linalg.eigh(H)
        k = int(rng.integers(0, m))
        rep = weyl_matrix_check(H, vecs[:, k], evals[k])
        assert abs(rep.q_lin) <= 1e-9 * max(1.0, abs(evals[k]))
        assert rep.q_f <= 1e-9 * max(1.0, evals[k] ** 2)


def test_power_spec_reports_companion():
    H = np.diag([0.0, 2.0])
    psi = np.array([1.0, 1.0]) / math.sqrt(2.0)
    rep = weyl_matrix_check(H, psi, 1.0, PowerSpec(alpha=2.0, N=1))
    # f(x) = (x+2)^{-1}: q_f = 0.5*(1/2 + 1/4) = 3/8
    assert rep.q_f == pytest.approx(0.5 * (0.5 + 0.25), abs=1e-12)
    # companion N=2: 0.5*(1/4 + 1/16)
    assert rep.q_f_next == pytest.approx(0.5 * (0.25 + 0.0625), abs=1e-12)
    assert rep.residual <= 1e-12


def test_matrix_input_validation():
    with pytest.raises(InputError):
        weyl_matrix_check(np.array([[0.0, 1.0], [0.5, 0.0]]), np.ones(2), 0.0)
    with pytest.raises(InputError):
        weyl_matrix_check(np.eye(2), np.zeros(2), 0.0)
    with pytest.raises(InputError):
        weyl_matrix_check(np.eye(2), np.ones(3), 0.0)
    with pytest.raises(ParameterError):
        PowerSpec(alpha=0.5, N=1)
    with pytest.raises(ParameterError):
        PowerSpec(alpha=2.0, N=0)


def test_tridiagonal_operator_path():
    # duck-typed .d/.e operators go through the banded solver
    class T:
        d = np.array([2.0, 2.0, 2.0])
        e = np.array([-1.0, -1.0])

    H = np.diag(T.d) + np.diag(T.e, 1) + np.diag(T.e, -1)
    psi = np.array([0.3, -0.5, 1.1])
    r1 = weyl_matrix_check(T(), psi, 1.3)
    r2 = weyl_matrix_check(H, psi, 1.3)
    assert r1.q_lin == pytest.approx(r2.q_lin, abs=1e-12)
    assert r1.q_f == pytest.approx(r2.q_f, abs=1e-12)

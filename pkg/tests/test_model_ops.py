import cmath
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clarkmodel.analytic import phi_t
from clarkmodel.experiments import random_measure
from clarkmodel.measures import CircleMeasure
from clarkmodel.model_ops import (PerturbedShiftModel, TruncationWarning, apply_phi_t,
                                  apply_stilde, cogenerator_identity_check,
                                  difference_section, isometry_defect, lower_toeplitz,
                                  match_spectra, matrix_truncation,
                                  section_semigroup_defect, stilde_minus_s_norms,
                                  taylor_coefficients, unitary_block_check,
                                  unitary_semigroup_defect, wold_defect)
from clarkmodel.quadrature import QuadratureError

SEED = 11
MINUS_ONE = CircleMeasure.from_angles([1.0], [1.0])
AT_I = CircleMeasure.from_angles([0.5], [1.0])


def poly_mul(a, b, D):
    return np.convolve(a, b)[:D]


def test_model_structure():
    model = PerturbedShiftModel([CircleMeasure.from_angles([0.3, -0.4], [1.0, 2.0]), AT_I])
    assert len(model) == 2 and model.dimension == 3
    assert list(model.block_of_atom) == [0, 0, 1]
    np.testing.assert_allclose(model.masses, [3.0, 1.0])
    assert len(model.to_dict()["blocks"]) == 2
    with pytest.raises(ValueError):
        PerturbedShiftModel([MINUS_ONE] * 3, max_blocks=2)


def test_taylor_coefficients_of_rational_function():
    a = np.array([0.5, -0.3 + 0.4j])
    c, tail = taylor_coefficients(lambda z: 1 / (1 - a * z[:, None]), 40)
    m = np.arange(40)[:, None]
    np.testing.assert_allclose(c, a**m, atol=1e-15)
    exact_tail = np.abs(a) ** 80 / (1 - np.abs(a) ** 2)
    # squared coefficients near 1e-12 carry round-off at the 1e-5 level
    np.testing.assert_allclose(tail, exact_tail, rtol=1e-4)


def test_taylor_coefficients_unresolved():
    with pytest.raises(QuadratureError):
        taylor_coefficients(lambda z: 1 / (1.001 - z), 8, m_max=1024)


def test_stilde_on_constant_is_atom_eigenvalue():
    out = apply_stilde(PerturbedShiftModel(MINUS_ONE), np.array([1.0]), degree=4)
    np.testing.assert_allclose(out, [-1, 0, 0, 0], atol=1e-15)


def test_stilde_on_zero():
    out = apply_stilde(PerturbedShiftModel(AT_I), np.zeros(3))
    np.testing.assert_array_equal(out, 0)


def test_stilde_is_shift_on_theta_multiples():
    model = PerturbedShiftModel([CircleMeasure.from_angles([0.5, -0.7], [0.6, 0.9]), MINUS_ONE])
    D = 96
    th, _ = taylor_coefficients(model.theta, D)
    th = th[:, 0]
    for m in range(4):
        f = np.concatenate([np.zeros(m), th[: D - m - 1]])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            out = apply_stilde(model, f, degree=D)
        want = np.concatenate([np.zeros(m + 1), th[: D - m - 1]])
        np.testing.assert_allclose(out[: D - 8], want[: D - 8], atol=1e-12)


def test_stilde_warns_when_degree_too_small():
    with pytest.warns(TruncationWarning):
        apply_stilde(PerturbedShiftModel(AT_I), np.ones(4), degree=4)


def test_perturbation_norms_single_atom():
    pert = stilde_minus_s_norms(PerturbedShiftModel(MINUS_ONE))
    assert pert.rank == 1
    assert pert.operator_norm == pytest.approx(math.sqrt(2), rel=1e-12)
    assert pert.trace_norm == pytest.approx(math.sqrt(2), rel=1e-12)
    assert pert.single_block_product == pytest.approx(math.sqrt(2), rel=1e-12)
    assert pert.operator_bound == 2 and pert.operator_bound_holds


def test_perturbation_operator_bound_quarter_mass():
    pert = stilde_minus_s_norms(PerturbedShiftModel(CircleMeasure.from_angles([1.0], [0.25])))
    assert pert.operator_bound == 1
    assert pert.operator_norm < 1 and pert.operator_bound_holds
    assert pert.operator_norm == pytest.approx(pert.single_block_product, rel=1e-12)


def test_perturbation_trace_bound_two_blocks():
    model = PerturbedShiftModel([MINUS_ONE, AT_I])
    pert = stilde_minus_s_norms(model)
    assert pert.rank == 2
    assert pert.trace_bound == 4 and pert.trace_norm < 4 and pert.trace_bound_holds
    assert pert.operator_bound is None


def test_perturbation_norms_match_dense_section():
    blocks = [CircleMeasure.from_angles([0.3, -0.6], [0.8, 0.4]), AT_I,
              CircleMeasure.from_angles([0.9, 0.6, -0.2], [0.2, 0.5, 1.0])]
    model = PerturbedShiftModel(blocks)
    pert = stilde_minus_s_norms(model)
    M = 256
    diff = matrix_truncation(model, M, "stilde").matrix - np.eye(M, k=-1)
    s = np.linalg.svd(diff, compute_uv=False)
    np.testing.assert_allclose(s[: pert.rank], pert.singular_values[: pert.rank], rtol=1e-8)
    assert pert.rank == len(model)
    assert s[len(model)] < 1e-10


def test_unitary_block_two_blocks():
    rep = unitary_block_check(PerturbedShiftModel([MINUS_ONE, AT_I]))
    assert rep.passed
    assert match_spectra(rep.eigenvalues, [-1, 1j]) < 1e-8


def test_unitary_block_single_atom_at_i():
    rep = unitary_block_check(PerturbedShiftModel(AT_I))
    np.testing.assert_allclose(rep.compression, [[1j]], atol=1e-12)


def test_unitary_block_empty():
    model = PerturbedShiftModel([])
    rep = unitary_block_check(model)
    assert rep.passed and rep.eigenvalues.size == 0
    np.testing.assert_array_equal(matrix_truncation(model, 4, "stilde").matrix, np.eye(4, k=-1))
    assert stilde_minus_s_norms(model).trace_norm == 0


def test_unitary_block_random_models():
    rng = np.random.default_rng(SEED)
    for _ in range(5):
        blocks = [random_measure(rng, 6) for _ in range(int(rng.integers(1, 4)))]
        rep = unitary_block_check(PerturbedShiftModel(blocks))
        assert rep.passed, (rep.gram_error, rep.compression_error, rep.worst_pair)


def test_unitary_block_reports_offending_pair():
    rep = unitary_block_check(PerturbedShiftModel(CircleMeasure.from_angles([0.5, -0.5],
                                                                          [1.0, 1.0])),
                              tol=0.0)
    assert not rep.passed
    assert rep.worst_pair is not None and all(0 <= i < 2 for i in rep.worst_pair)


def test_match_spectra():
    assert match_spectra([1, 2, 3], [3, 1, 2]) == 0
    assert match_spectra([1, 2], [1, 2, 3]) == math.inf
    assert match_spectra([], []) == 0


def test_phi_t_on_clark_basis_is_diagonal():
    model = PerturbedShiftModel(AT_I)
    D, t = 64, 0.7
    E, _ = taylor_coefficients(model.clark_basis, D)
    out = apply_phi_t(model, t, E[:, 0])
    np.testing.assert_allclose(out, cmath.exp(-1j * t) * E[:, 0], atol=1e-13)


def test_phi_zero_is_identity():
    rng = np.random.default_rng(SEED)
    model = PerturbedShiftModel(random_measure(rng, 4))
    f = rng.normal(size=20) + 1j * rng.normal(size=20)
    np.testing.assert_allclose(apply_phi_t(model, 0.0, f), f, atol=1e-13)
    np.testing.assert_allclose(apply_phi_t(model, 0.0, f, perturbed=False), f, atol=1e-15)


def test_phi_t_rejects_negative_time():
    with pytest.raises(ValueError):
        apply_phi_t(PerturbedShiftModel(AT_I), -0.1, np.ones(2))


def test_phi_t_agrees_with_multiplication_on_theta():
    model = PerturbedShiftModel(CircleMeasure.from_angles([0.4, -0.8], [0.5, 1.5]))
    D, t = 128, 1.3
    th, _ = taylor_coefficients(model.theta, D)
    th = th[:, 0]
    a = apply_phi_t(model, t, th)
    b = apply_phi_t(model, t, th, perturbed=False)
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_unperturbed_phi_t_is_convolution():
    f = np.array([1.0, 2.0, -1.0])
    # phi_(1/2)(z) = e^(-1/2) exp(-z/(1 - z)), expanded by hand
    c = np.exp(-0.5) * np.array([1, -1, -1 / 2, -1 / 6, 1 / 24])
    out = apply_phi_t(PerturbedShiftModel([]), 0.5, f, degree=5)
    np.testing.assert_allclose(out, poly_mul(c, f, 5), atol=1e-15)


def test_cogenerator_identity_examples():
    err, errs = cogenerator_identity_check([1j, -1.0])
    assert err < 1e-10 and errs.shape == (2,)
    rng = np.random.default_rng(SEED)
    pts = np.exp(1j * rng.uniform(0.01, 2 * math.pi - 0.01, 30))
    assert cogenerator_identity_check(pts)[0] < 1e-10


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 2 * math.pi - 0.05))
def test_laplace_formula_for_symbol(a):
    # int_0^inf e^-t phi_t(z) dt = (1 - z)/2
    xi = cmath.exp(1j * a)
    assert cogenerator_identity_check([xi])[0] < 1e-10


def test_truncation_shift_and_unit_symbol():
    model = PerturbedShiftModel(MINUS_ONE)
    S = matrix_truncation(model, 3, "shift").matrix
    np.testing.assert_array_equal(S, [[0, 0, 0], [1, 0, 0], [0, 1, 0]])
    for M in (1, 5, 17):
        np.testing.assert_allclose(matrix_truncation(model, M, "phi_shift", 0.0).matrix,
                                   np.eye(M), atol=1e-15)
        np.testing.assert_allclose(matrix_truncation(model, M, "phi_stilde", 0.0).matrix,
                                   np.eye(M), atol=1e-13)


def test_truncation_single_atom_perturbation():
    M = 32
    model = PerturbedShiftModel(MINUS_ONE)
    op = matrix_truncation(model, M, "stilde")
    diff = op.matrix - np.eye(M, k=-1)
    want = np.zeros((M, M))
    want[0, 0] = want[1, 0] = -1
    np.testing.assert_allclose(diff, want, atol=1e-14)
    # S~ 1 = -1: the shift entry below the diagonal is cancelled
    entries = {(r["row"], r["col"]): r["re"] for r in op.to_rows() if abs(r["re"]) > 1e-12}
    assert entries[(0, 0)] == pytest.approx(-1)
    assert (1, 0) not in entries and entries[(2, 1)] == 1


def test_truncation_rejects_bad_kind():
    with pytest.raises(ValueError):
        matrix_truncation(PerturbedShiftModel(MINUS_ONE), 4, "other")
    with pytest.raises(ValueError):
        matrix_truncation(PerturbedShiftModel(MINUS_ONE), 4, "phi_stilde")


def test_truncation_rank_and_tail():
    rng = np.random.default_rng(SEED)
    blocks = [random_measure(rng, 3) for _ in range(2)]
    op = matrix_truncation(PerturbedShiftModel(blocks), 128, "stilde")
    s = np.linalg.svd(op.matrix - np.eye(128, k=-1), compute_uv=False)
    assert np.sum(s > 1e-8) <= 2
    assert op.tail < 1e-10


def test_lower_toeplitz():
    np.testing.assert_array_equal(lower_toeplitz(np.array([1, 2, 3])),
                                  [[1, 0, 0], [2, 1, 0], [3, 2, 1]])


def test_isometry_defect_decreases():
    model = PerturbedShiftModel(CircleMeasure.from_angles([0.5, -0.5], [0.05, 0.05]))
    d = [isometry_defect(model, M) for M in (32, 64, 128)]
    assert all(b < a for a, b in zip(d, d[1:])), d
    assert d[-1] < 1e-8


def test_semigroup_exact_on_unitary_block():
    rng = np.random.default_rng(SEED)
    model = PerturbedShiftModel([random_measure(rng, 8) for _ in range(3)])
    for t, s in ((0.1, 0.2), (1.0, 3.0), (5.0, 5.0)):
        assert unitary_semigroup_defect(model, t, s) <= 1e-14
    assert unitary_semigroup_defect(PerturbedShiftModel([]), 1.0, 1.0) == 0


def test_section_semigroup_defect_decreases():
    model = PerturbedShiftModel(CircleMeasure.from_angles([0.5, -0.5], [0.03, 0.03]))
    d = [section_semigroup_defect(model, 1.0, 0.5, M) for M in (32, 64, 128, 256)]
    assert all(b < a for a, b in zip(d, d[1:])), d


def test_difference_annihilates_theta_multiples():
    model = PerturbedShiftModel([CircleMeasure.from_angles([0.3, -0.6], [0.8, 0.4]), AT_I])
    assert wold_defect(model, 1.0, 128) < 1e-10


def test_difference_section_is_low_rank():
    model = PerturbedShiftModel([MINUS_ONE, AT_I])
    s = np.linalg.svd(difference_section(model, 1.0, 128), compute_uv=False)
    assert np.sum(s > 1e-8) == 2
    np.testing.assert_array_equal(difference_section(PerturbedShiftModel([]), 1.0, 4), 0)


def test_phi_stilde_section_matches_apply():
    model = PerturbedShiftModel(CircleMeasure.from_angles([0.4, -0.8], [0.5, 1.5]))
    M, t = 64, 0.8
    C = matrix_truncation(model, M, "phi_stilde", t).matrix
    f = np.zeros(M, complex)
    f[:3] = [1, -2, 0.5j]
    np.testing.assert_allclose(C @ f, apply_phi_t(model, t, f), atol=1e-12)
    # the difference on the unitary block is diagonal
    assert phi_t(t, model.atoms).shape == (2,)

import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from builders import lazy_reversible, random_generator, random_measure, random_reversible_generator, reversible_from_spectrum
from revembed import catalog
from revembed.embedding import (
    EIGEN,
    EMBEDDABLE_NOT_REVERSIBLY,
    NOT_EMBEDDABLE,
    NOT_EMBEDDABLE_NEGATIVE_SIMPLE,
    PRINCIPAL_LOG_NOT_GENERATOR,
    REVERSIBLY_EMBEDDABLE,
    UNDECIDED,
    NotEmbeddable,
    classify_embeddability,
    is_markov_generator,
    kendall_2x2,
    log_coefficients_vdm,
    log_family_minus_identity,
    markov_sqrt_positive,
    principal_log_integral,
    principal_log_reversible,
    principal_log_series,
    real_sqrt_minus_identity,
    theta_set_probe,
)
from revembed.errors import NonPositiveSpectrum, NotReversibleForP, SeriesDivergence, ZeroB
from revembed.linalg import commutator, expm, inf_norm, sym_eigen
from revembed.markov import RateMatrix, validate_generator
from revembed.reversibility import detailed_balance_residual, tilde

LAM0 = 2 * math.pi / math.sqrt(3)
UNIFORM3 = np.full(3, 1 / 3)


def two_state(a, b):
    return np.array([[1 - a, a], [b, 1 - b]])


@pytest.fixture(scope="module")
def strange():
    M = catalog.m_delta(catalog.EPSILON).entries
    plus, minus = catalog.q_pair(LAM0)
    return M, plus.entries, minus.entries


class TestPrincipalLog:
    def test_identity(self):
        np.testing.assert_array_equal(principal_log_reversible(np.eye(3)).L, np.zeros((3, 3)))

    def test_two_state_closed_form(self):
        M = two_state(0.25, 0.25)
        cand = principal_log_reversible(M, [0.5, 0.5])
        np.testing.assert_allclose(cand.L, 2 * math.log(2) * (M - np.eye(2)), atol=1e-15)
        assert cand.L[0, 1] == pytest.approx(0.34657, abs=5e-6)
        assert cand.method == EIGEN and cand.residual < 1e-15

    def test_square_of_strange_matrix(self, strange):
        M, plus, minus = strange
        L = principal_log_reversible(M @ M).L
        assert inf_norm(L - (plus + minus)) <= 1e-9
        assert detailed_balance_residual(L, UNIFORM3) <= 1e-12

    def test_negative_spectrum(self, strange):
        with pytest.raises(NonPositiveSpectrum) as info:
            principal_log_reversible(strange[0])
        assert info.value.eigenvalue == pytest.approx(-catalog.EPSILON)

    def test_wrong_measure(self):
        with pytest.raises(NotReversibleForP):
            principal_log_reversible(two_state(0.3, 0.6), [0.5, 0.5])

    def test_not_reversible(self):
        with pytest.raises(NotReversibleForP):
            principal_log_reversible([[0.7, 0.2, 0.1], [0.1, 0.7, 0.2], [0.2, 0.1, 0.7]])

    def test_against_scipy(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            M, p = lazy_reversible(rng, 4)
            np.testing.assert_allclose(principal_log_reversible(M, p).L, scipy.linalg.logm(M).real, atol=1e-10)


class TestSeries:
    def test_identity(self):
        np.testing.assert_array_equal(principal_log_series(np.eye(2)).L, np.zeros((2, 2)))

    def test_matches_eigen_method(self):
        M = two_state(0.25, 0.25)
        assert inf_norm(principal_log_series(M).L - principal_log_reversible(M).L) <= 1e-12

    def test_slow_convergence(self):
        M = two_state(0.49, 0.49)
        assert inf_norm(principal_log_series(M).L - principal_log_reversible(M).L) <= 1e-9

    def test_divergence(self):
        with pytest.raises(SeriesDivergence):
            principal_log_series([[0.0, 1.0], [1.0, 0.0]])


class TestVandermonde:
    def test_two_state(self):
        a, b = 0.3, 0.2
        alpha, cand = log_coefficients_vdm(two_state(a, b))
        np.testing.assert_allclose(alpha, [-math.log(1 - a - b) / (a + b)], rtol=1e-14)
        assert cand.residual <= 1e-12

    def test_identity(self):
        alpha, cand = log_coefficients_vdm(np.eye(3))
        assert alpha.size == 0
        np.testing.assert_array_equal(cand.L, np.zeros((3, 3)))

    def test_random_three_state(self):
        rng = np.random.default_rng(14)
        for _ in range(20):
            M, p = lazy_reversible(rng, 3)
            alpha, cand = log_coefficients_vdm(M, p)
            assert alpha.size == 2
            assert inf_norm(cand.L - principal_log_reversible(M, p).L) <= 1e-9

    def test_equal_input_has_one_coefficient(self):
        x = np.array([0.1, 0.2, 0.3])
        alpha, _ = log_coefficients_vdm(catalog.equal_input_markov(x).entries)
        np.testing.assert_allclose(alpha, [-math.log(1 - 0.6) / 0.6], rtol=1e-12)


class TestGeneratorCheck:
    def test_cycle(self):
        assert is_markov_generator(catalog.q_pair(1.0)[0].entries) == (True, [])

    def test_zero(self):
        assert is_markov_generator(np.zeros((3, 3)))[0]

    def test_negative_offdiagonal(self):
        L = np.array([[-0.5, 0.51, -0.01], [0.2, -0.4, 0.2], [0.3, 0.3, -0.6]])
        ok, violations = is_markov_generator(L)
        assert not ok
        assert [(v.kind, v.index) for v in violations] == [("offdiag", (0, 2))]
        assert violations[0].value == pytest.approx(-0.01)

    def test_row_sum(self):
        ok, violations = is_markov_generator([[-1.0, 0.5], [0.0, 0.0]])
        assert not ok and violations[0].kind == "rowsum" and violations[0].index == (0,)


class TestKendall:
    def test_example(self):
        M = two_state(0.3, 0.2)
        Q = kendall_2x2(M)
        assert isinstance(Q, RateMatrix)
        assert Q.entries[0, 1] == pytest.approx(0.3 * math.log(2) / 0.5, rel=1e-14)
        assert Q.entries[0, 1] == pytest.approx(0.41589, abs=5e-6)
        assert inf_norm(expm(Q.entries) - M) <= 1e-12

    def test_swap(self):
        assert isinstance(kendall_2x2([[0.0, 1.0], [1.0, 0.0]]), NotEmbeddable)

    def test_identity(self):
        np.testing.assert_array_equal(kendall_2x2(np.eye(2)).entries, np.zeros((2, 2)))

    def test_boundary(self):
        assert isinstance(kendall_2x2(two_state(0.5, 0.5)), NotEmbeddable)


class TestClassifier:
    def test_strange_matrix(self, strange):
        M, plus, minus = strange
        rep = classify_embeddability(M)
        cls = rep.classification
        assert cls.kind == EMBEDDABLE_NOT_REVERSIBLY and cls.commuting is True
        assert len(cls.pairs) == 1
        np.testing.assert_allclose(cls.pairs[0][0].entries, plus, atol=1e-14)
        np.testing.assert_allclose(cls.pairs[0][1].entries, minus, atol=1e-14)

    def test_square_of_strange_matrix(self, strange):
        M, plus, minus = strange
        rep = classify_embeddability(M @ M)
        cls = rep.classification
        assert cls.kind == REVERSIBLY_EMBEDDABLE
        assert inf_norm(cls.generator.entries - (plus + minus)) <= 1e-9
        assert len(cls.pairs) == 1 and cls.commuting
        np.testing.assert_allclose(cls.pairs[0][0].entries, 2 * plus, atol=1e-10)
        assert len(cls.generators) == 3

    def test_negative_simple_eigenvalue(self):
        rng = np.random.default_rng(15)
        M, _ = reversible_from_spectrum(rng, [0.6, -0.2])
        np.testing.assert_allclose(np.sort(np.linalg.eigvals(M).real), [-0.2, 0.6, 1.0], atol=1e-12)
        rep = classify_embeddability(M)
        assert rep.kind == NOT_EMBEDDABLE_NEGATIVE_SIMPLE
        assert rep.det == pytest.approx(-0.12)

    def test_two_state_negative(self):
        assert classify_embeddability(two_state(0.7, 0.6)).kind == NOT_EMBEDDABLE_NEGATIVE_SIMPLE
        assert classify_embeddability(two_state(0.5, 0.5)).kind == NOT_EMBEDDABLE

    def test_two_state_weakly_reversible(self):
        rep = classify_embeddability([[1.0, 0.0], [0.3, 0.7]])
        assert rep.kind == REVERSIBLY_EMBEDDABLE
        assert rep.classification.notes

    def test_principal_log_not_generator(self):
        # reversible with positive spectrum whose log has a negative rate
        M = np.array([[0.8, 0.2, 0.0], [0.1, 0.8, 0.1], [0.0, 0.2, 0.8]])
        rep = classify_embeddability(M)
        assert rep.kind == PRINCIPAL_LOG_NOT_GENERATOR
        assert {v.index for v in rep.classification.violations} == {(0, 2), (2, 0)}

    def test_reversibly_embeddable_random(self):
        rng = np.random.default_rng(16)
        for _ in range(20):
            R, p = random_reversible_generator(rng, 4)
            M = expm(R)
            rep = classify_embeddability(M)
            assert rep.kind == REVERSIBLY_EMBEDDABLE
            assert inf_norm(rep.classification.generator.entries - R) <= 1e-9
            assert rep.alpha is not None and rep.alpha.size == 3

    def test_dihedral(self):
        M = catalog.dihedral_markov().entries
        rep = classify_embeddability(M)
        assert rep.kind == EMBEDDABLE_NOT_REVERSIBLY and rep.classification.commuting is False
        rep2 = classify_embeddability(M @ M)
        assert rep2.kind == REVERSIBLY_EMBEDDABLE and rep2.classification.commuting is False
        L = catalog.constant_input_generator(math.sqrt(3) * math.pi, 4).entries
        # float64 loses about 1e-6 here; the extended precision path is tested separately
        assert inf_norm(rep2.classification.generator.entries - L) <= 1e-5

    def test_not_embeddable_above_epsilon(self):
        rep = classify_embeddability(catalog.m_delta(0.3).entries)
        assert rep.kind == NOT_EMBEDDABLE

    def test_undecided_cases(self):
        cyc = [[0.7, 0.2, 0.1], [0.1, 0.7, 0.2], [0.2, 0.1, 0.7]]
        assert classify_embeddability(cyc).kind == UNDECIDED
        assert classify_embeddability(np.full((3, 3), 1 / 3)).kind == UNDECIDED
        # d = 4 reversible, negative eigenvalue of multiplicity two, not a catalog matrix
        rng = np.random.default_rng(17)
        M, _ = reversible_from_spectrum(rng, [0.6, -0.05, -0.05])
        rep = classify_embeddability(M)
        assert rep.kind == UNDECIDED and "even multiplicity" in rep.classification.reason

    def test_equal_input_weak(self):
        x = np.array([0.2, 0.0, 0.1])
        rep = classify_embeddability(catalog.equal_input_markov(x).entries)
        assert rep.kind == REVERSIBLY_EMBEDDABLE
        np.testing.assert_allclose(
            rep.classification.generator.entries,
            -math.log(0.7) / 0.3 * catalog.equal_input_generator(x).entries,
            atol=1e-14,
        )

    def test_report_invariant(self):
        # every generator in a report is valid and exponentiates to M
        cases = [
            catalog.m_delta(catalog.delta_k(2)).entries,
            catalog.m_delta(-0.01).entries,
            catalog.dihedral_markov().entries,
            two_state(0.1, 0.4),
        ]
        for M in cases:
            rep = classify_embeddability(M)
            for g in rep.classification.generators:
                validate_generator(g.entries)
                assert inf_norm(expm(g.entries) - M) <= 1e-9


class TestSquareRoot:
    def test_identity(self):
        np.testing.assert_allclose(markov_sqrt_positive(np.eye(3)).entries, np.eye(3), atol=1e-15)

    def test_sign_flip(self, strange):
        M = strange[0]
        R = markov_sqrt_positive(M @ M).entries
        assert inf_norm(R - catalog.m_delta(-catalog.EPSILON).entries) <= 1e-10
        assert R[0, 0] == pytest.approx((1 + 2 * catalog.EPSILON) / 3)

    def test_dihedral_square(self):
        M = catalog.dihedral_markov().entries
        M2 = M @ M
        R = markov_sqrt_positive(M2).entries
        assert inf_norm(R @ R - M2) <= 1e-10
        eig = sym_eigen(R).eigenvalues
        e = catalog.EPSILON_DIHEDRAL
        np.testing.assert_allclose(eig, [1, e, e, e], atol=1e-9)

    def test_composite_pair(self, strange):
        M, plus, minus = strange
        R = expm((plus + minus) / 2)
        assert inf_norm(R - markov_sqrt_positive(M @ M).entries) <= 1e-9

    def test_negative_spectrum(self, strange):
        with pytest.raises(NonPositiveSpectrum):
            markov_sqrt_positive(strange[0])


class TestRootsOfMinusOne:
    def test_rotation(self):
        I = real_sqrt_minus_identity(0, 1)
        np.testing.assert_array_equal(I, [[0, 1], [-1, 0]])
        np.testing.assert_array_equal(commutator(I, I.T), np.zeros((2, 2)))
        np.testing.assert_array_equal(real_sqrt_minus_identity(0, -1), [[0, -1], [1, 0]])

    def test_one_two(self):
        I = real_sqrt_minus_identity(1, 2)
        np.testing.assert_array_equal(I, [[1, 2], [-1, -1]])
        np.testing.assert_array_equal(I @ I, -np.eye(2))
        assert np.linalg.det(I) == pytest.approx(1.0)

    def test_zero_b(self):
        with pytest.raises(ZeroB):
            real_sqrt_minus_identity(1, 0)
        with pytest.raises(ZeroB):
            log_family_minus_identity(0, 1, 0)

    @pytest.mark.parametrize("m,a,b", [(0, 0, 1), (-1, 0, 1), (0, 1, 2)])
    def test_logs_of_minus_one(self, m, a, b):
        assert inf_norm(expm(log_family_minus_identity(m, a, b)) + np.eye(2)) <= 1e-10

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-3, 3), st.floats(0.3, 3), st.booleans())
    def test_square_property(self, a, b, neg):
        I = real_sqrt_minus_identity(a, -b if neg else b)
        np.testing.assert_allclose(I @ I, -np.eye(2), atol=1e-13 * max(1, a * a + 1) / min(b, 1))


class TestThetaProbe:
    def test_equal_generators(self):
        Q = random_generator(np.random.default_rng(18), 3)
        grid = np.linspace(0, 2, 9)
        assert theta_set_probe(Q, Q, grid) == list(grid)

    def test_cycle_pair(self, strange):
        _, plus, minus = strange
        assert theta_set_probe(plus, minus, np.arange(13) * 0.25) == [0.0, 1.0, 2.0, 3.0]

    def test_distinct_random(self):
        rng = np.random.default_rng(19)
        Q, R = random_generator(rng, 3), random_generator(rng, 3)
        assert theta_set_probe(Q, R, np.linspace(0, 3, 31)) == [0.0]


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 5), st.integers(0, 2**32 - 1))
    def test_method_agreement(self, d, seed):
        rng = np.random.default_rng(seed)
        M, p = lazy_reversible(rng, d)
        eig = principal_log_reversible(M, p)
        assert eig.residual <= 1e-9
        assert detailed_balance_residual(eig.L, p) <= 1e-9
        logs = [principal_log_integral(M).L]
        if np.min(sym_eigen(np.sqrt(p)[:, None] * M / np.sqrt(p)[None, :]).eigenvalues) > 0.1:
            logs.append(principal_log_series(M).L)
        try:
            logs.append(log_coefficients_vdm(M, p)[1].L)
        except ArithmeticError:
            pass
        for L in logs:
            assert inf_norm(L - eig.L) <= 1e-8

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 5), st.integers(0, 2**32 - 1))
    def test_exponential_of_reversible_generator(self, d, seed):
        rng = np.random.default_rng(seed)
        R, p = random_reversible_generator(rng, d, scale=3.0)
        M = expm(R)
        assert detailed_balance_residual(M, p) <= 1e-10
        S = np.sqrt(p)[:, None] * M / np.sqrt(p)[None, :]
        assert np.min(sym_eigen(S).eigenvalues) > 0
        assert inf_norm(expm(tilde(R, p)) - tilde(M, p)) <= 1e-10
        assert inf_norm(principal_log_reversible(M, p).L - R) <= 1e-8

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 5), st.integers(0, 2**32 - 1))
    def test_generator_transfer(self, d, seed):
        rng = np.random.default_rng(seed)
        R = random_generator(rng, d)
        (p,) = [q for q in [scipy.linalg.null_space(R.T)[:, 0]]]
        p = np.abs(p) / np.abs(p).sum()
        T = tilde(R, p)
        assert is_markov_generator(T)[0]
        # a matrix with zero row sums but no equilibrium p loses the property
        assert inf_norm(tilde(T, p) - R) <= 1e-10
        q = random_measure(rng, d)
        if np.max(np.abs(q @ R)) > 1e-6:
            assert not is_markov_generator(tilde(R, q))[0]

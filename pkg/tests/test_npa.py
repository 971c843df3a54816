import numpy as np
import pytest

from hardylab.behavior import Scenario
from hardylab.errors import CapabilityError, SizeError, ValidationError
from hardylab.npa import (build_moment_problem, canonical_monomial, dagger,
                          hardy_moment_vector, identity_monomial,
                          interior_moment_vector, monomial_from_str,
                          monomial_list, monomial_str, mul, npa_upper_bound,
                          problem_from_text, problem_to_text,
                          quantum_moment_vector)
from hardylab.sdp import _Compiled


def random_realization(rng, n):
    """Qubit projectors and a random pure state, for the operator oracle."""
    projs = []
    for _ in range(n):
        a2 = rng.uniform(0.1, 0.9)
        a = np.sqrt(a2) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        b = np.sqrt(1 - a2) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        plus = np.array([a, b])
        projs.append((np.diag([1.0 + 0j, 0.0]), np.outer(plus, plus.conj())))
    psi = rng.standard_normal(2 ** n) + 1j * rng.standard_normal(2 ** n)
    psi /= np.linalg.norm(psi)
    return projs, psi


def monomial_operator(mono, projs):
    op = np.eye(1, dtype=complex)
    for party, word in enumerate(mono):
        w = np.eye(2, dtype=complex)
        for letter in word:
            w = w @ projs[party][letter]
        op = np.kron(op, w)
    return op


class TestCanonicalMonomial:
    def test_idempotency(self):
        assert canonical_monomial([(0, 0), (0, 0)], 2) == ((0,), ())

    def test_cross_party_commutation(self):
        assert canonical_monomial([(1, 0), (0, 0)], 2) == ((0,), (0,))

    def test_same_party_order_preserved(self):
        mono = canonical_monomial([(0, 0), (0, 1), (0, 0)], 2)
        assert mono == ((0, 1, 0), ())

    def test_canonicalisation_idempotent(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            ops = [(int(rng.integers(0, 3)), int(rng.integers(0, 2)))
                   for _ in range(rng.integers(1, 7))]
            mono = canonical_monomial(ops, 3)
            flat = [(p, letter) for p, word in enumerate(mono) for letter in word]
            assert canonical_monomial(flat, 3) == mono

    def test_string_round_trip(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            ops = [(int(rng.integers(0, 3)), int(rng.integers(0, 2)))
                   for _ in range(rng.integers(0, 6))]
            mono = canonical_monomial(ops, 3)
            assert monomial_from_str(monomial_str(mono), 3) == mono


class TestMonomialList:
    @pytest.mark.parametrize("n,level,count", [
        (2, 1, 5), (3, 1, 7), (3, 2, 25), (2, 2, 13), (2, 3, 25), (3, 3, 63)])
    def test_counts(self, n, level, count):
        assert len(monomial_list(Scenario(n), level)) == count

    def test_deterministic_order(self):
        a = monomial_list(Scenario(3), 2)
        b = monomial_list(Scenario(3), 2)
        assert a == b
        assert a[0] == identity_monomial(3)

    def test_size_guard(self):
        with pytest.raises(SizeError):
            monomial_list(Scenario(4), 10)


class TestBuildMomentProblem:
    def test_tripartite_level2_structure(self):
        p = build_moment_problem(Scenario(3), 2, 0.0)
        assert p.n_basis == 25
        assert len(p.inequalities) == 4
        assert len(p.objective) == 1
        obj_var = next(iter(p.objective))
        assert p.variables[obj_var] == ((0,), (0,), (0,))

    def test_bipartite_level2_shape(self):
        p = build_moment_problem(Scenario(2), 2, 0.0)
        assert p.n_basis == 13

    def test_epsilon_one_inequalities_slack(self):
        p = build_moment_problem(Scenario(3), 2, 1.0)
        assert all(rhs == 1.0 for _, rhs in p.inequalities)
        interior = interior_moment_vector(p)
        for row, rhs in p.inequalities:
            assert sum(coef * interior[k] for k, coef in row.items()) < rhs

    def test_level_too_low(self):
        with pytest.raises(CapabilityError):
            build_moment_problem(Scenario(3), 1, 0.0)

    def test_matrix_symmetry(self):
        for n, level in ((2, 2), (3, 2)):
            p = build_moment_problem(Scenario(n), level, 0.0)
            assert (p.cell_var == p.cell_var.T).all()
            for i in range(p.n_basis):
                for j in range(p.n_basis):
                    w = mul(dagger(p.basis[i]), p.basis[j])
                    wd = dagger(mul(dagger(p.basis[j]), p.basis[i]))
                    assert p.cell_var[i, j] == p.cell_var[j, i]
                    assert w == wd

    def test_cells_match_operator_oracle(self):
        # independent oracle: raw matrix products of random realizations
        rng = np.random.default_rng(11)
        for n, level in ((2, 3), (3, 2)):
            p = build_moment_problem(Scenario(n), level, 0.0)
            for _ in range(3):
                projs, psi = random_realization(rng, n)
                ops = [monomial_operator(b, projs) for b in p.basis]
                gram = np.empty((p.n_basis, p.n_basis))
                for i in range(p.n_basis):
                    for j in range(p.n_basis):
                        gram[i, j] = np.vdot(psi, ops[i].conj().T @ ops[j] @ psi).real
                for v in range(p.n_vars):
                    vals = gram[p.cell_var == v]
                    assert vals.max() - vals.min() < 1e-12


class TestMomentVectors:
    def test_hardy_point_objective_and_psd(self):
        from hardylab.states import pmax
        p = build_moment_problem(Scenario(3), 3, 0.0)
        m = hardy_moment_vector(p)
        obj_var = next(iter(p.objective))
        assert abs(m[obj_var] - pmax(3).p_max) < 1e-12
        comp = _Compiled(p)
        w = np.linalg.eigvalsh(comp.mat(m))
        assert w.min() > -1e-10
        for row, rhs in p.inequalities:
            assert abs(sum(c * m[k] for k, c in row.items())) < 1e-12

    def test_interior_point_strictly_feasible(self):
        for n, level in ((2, 2), (3, 2), (3, 3)):
            p = build_moment_problem(Scenario(n), level, 0.0)
            m = interior_moment_vector(p)
            comp = _Compiled(p)
            w = np.linalg.eigvalsh(comp.mat(m))
            assert w.min() > 1e-7
            rows = [sum(c * m[k] for k, c in row.items())
                    for row, _ in p.inequalities]
            assert np.allclose(rows[:-1], 0.25, atol=1e-12)
            assert abs(rows[-1] - 0.5 ** n) < 1e-12

    def test_quantum_vector_matches_behavior(self):
        # success probability moment equals the Born-rule value
        from hardylab.behavior import (hardy_statistics, joint_distribution,
                                       measurements_from_pairs)
        from hardylab.states import MeasurementPair, hardy_state
        rng = np.random.default_rng(5)
        p = build_moment_problem(Scenario(2), 2, 0.0)
        for _ in range(5):
            a2 = rng.uniform(0.2, 0.8)
            pairs = [MeasurementPair.from_alpha_sq(a2)] * 2
            psi = hardy_state(2, pairs)
            m = quantum_moment_vector(p, psi, pairs)
            stats = hardy_statistics(joint_distribution(psi, measurements_from_pairs(pairs)))
            obj_var = next(iter(p.objective))
            assert abs(m[obj_var] - stats.p) < 1e-12


class TestSerialization:
    def test_round_trip(self):
        p = build_moment_problem(Scenario(3), 2, 0.05)
        q = problem_from_text(problem_to_text(p))
        assert q.basis == p.basis
        assert q.variables == p.variables
        assert (q.cell_var == p.cell_var).all()
        assert q.objective == p.objective
        assert q.equalities == p.equalities
        assert q.inequalities == p.inequalities
        assert q.epsilon == p.epsilon

    def test_rejects_unknown_header(self):
        with pytest.raises(ValidationError):
            problem_from_text("momentproblem/9\n")


class TestUpperBound:
    def test_bipartite_level2(self):
        val = npa_upper_bound(Scenario(2), 2, 0.0, tol=1e-6)
        assert abs(val - 0.0901699) < 5e-4

    def test_saturation_at_quarter(self):
        val = npa_upper_bound(Scenario(3), 2, 0.25, tol=1e-6)
        assert abs(val - 1.0) < 5e-4

    def test_deterministic(self):
        a = npa_upper_bound(Scenario(2), 2, 0.03, tol=1e-6)
        b = npa_upper_bound(Scenario(2), 2, 0.03, tol=1e-6)
        assert a == b

import numpy as np
import pytest

from conftest import random_pairs
from hardylab.behavior import (BehaviorTensor, Scenario, check_no_signaling,
                               hardy_statistics, joint_distribution,
                               measurements_from_observables,
                               measurements_from_pairs)
from hardylab.errors import ValidationError
from hardylab.linalg import StateVector
from hardylab.states import MeasurementPair, hardy_state, pmax


def computational_state(n, index=0):
    amps = np.zeros(2 ** n, dtype=complex)
    amps[index] = 1.0
    return StateVector((2,) * n, amps)


def optimal_setup(n):
    pairs = [MeasurementPair.from_alpha_sq(pmax(n).t)] * n
    return hardy_state(n, pairs), measurements_from_pairs(pairs)


class TestMeasurementsFromPairs:
    def test_hadamard_like(self):
        m = measurements_from_pairs([MeasurementPair.from_alpha_sq(0.5)] * 2)
        plus = m.projectors[0][1][0]
        assert abs(plus[0, 0].real - 0.5) < 1e-12

    def test_completeness(self):
        rng = np.random.default_rng(0)
        for pair in random_pairs(rng, 5):
            m = measurements_from_pairs([pair, pair])
            for setting in range(2):
                a, b = m.projectors[0][setting]
                assert np.linalg.norm(a + b - np.eye(2)) < 1e-12

    def test_overlap_trace(self):
        rng = np.random.default_rng(1)
        for pair in random_pairs(rng, 5):
            m = measurements_from_pairs([pair, pair])
            plus_d = m.projectors[0][1][0]
            plus_u = m.projectors[0][0][0]
            assert abs(np.trace(plus_d @ plus_u).real - abs(pair.alpha) ** 2) < 1e-12


class TestJointDistribution:
    def test_computational_basis(self):
        psi = computational_state(2)
        m = measurements_from_pairs([MeasurementPair.from_alpha_sq(0.5)] * 2)
        b = joint_distribution(psi, m)
        assert abs(b.probs[0, 0, 0, 0] - 1.0) < 1e-12

    def test_bipartite_optimum(self):
        psi, m = optimal_setup(2)
        b = joint_distribution(psi, m)
        assert abs(b.probs[0, 0, 0, 0] - 0.0901699) < 1e-6

    def test_maximally_mixed(self):
        rng = np.random.default_rng(2)
        m = measurements_from_pairs(random_pairs(rng, 2))
        b = joint_distribution(np.eye(4) / 4.0, m)
        assert np.allclose(b.probs, 0.25, atol=1e-12)

    def test_pure_rank1_path_matches_general_path(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            amps = rng.standard_normal(8) + 1j * rng.standard_normal(8)
            amps /= np.linalg.norm(amps)
            psi = StateVector((2, 2, 2), amps)
            m = measurements_from_pairs(random_pairs(rng, 3))
            fast = joint_distribution(psi, m)
            slow = joint_distribution(psi.density(), m)
            assert np.allclose(fast.probs, slow.probs, atol=1e-12)

    def test_normalisation_and_no_signaling(self):
        rng = np.random.default_rng(4)
        for n in (2, 3, 4):
            amps = rng.standard_normal(2 ** n) + 1j * rng.standard_normal(2 ** n)
            amps /= np.linalg.norm(amps)
            psi = StateVector((2,) * n, amps)
            b = joint_distribution(psi, measurements_from_pairs(random_pairs(rng, n)))
            sums = b.probs.sum(axis=tuple(range(n, 2 * n)))
            assert np.max(np.abs(sums - 1.0)) < 1e-10
            assert check_no_signaling(b).max_violation < 1e-10

    def test_dimension_mismatch(self):
        m = measurements_from_pairs([MeasurementPair.from_alpha_sq(0.5)] * 3)
        with pytest.raises(ValidationError):
            joint_distribution(computational_state(2), m)


class TestHardyStatistics:
    def test_optimal_tripartite(self):
        psi, m = optimal_setup(3)
        stats = hardy_statistics(joint_distribution(psi, m))
        assert abs(stats.p - 0.0181940) < 1e-6
        assert np.all(stats.zeros <= 1e-10)

    def test_zero_conditions_random_pairs(self):
        rng = np.random.default_rng(5)
        for n in (2, 3, 4, 5, 6):
            pairs = random_pairs(rng, n)
            psi = hardy_state(n, pairs)
            stats = hardy_statistics(joint_distribution(psi, measurements_from_pairs(pairs)))
            assert np.all(stats.zeros <= 1e-10)
            assert stats.p > 0

    def test_product_state_not_a_hardy_point(self):
        pair = MeasurementPair.from_alpha_sq(0.543689)
        psi = computational_state(3)
        stats = hardy_statistics(joint_distribution(psi, measurements_from_pairs([pair] * 3)))
        a2 = abs(pair.alpha) ** 2
        b2 = abs(pair.beta) ** 2
        assert abs(stats.p - 1.0) < 1e-12
        assert np.allclose(stats.zeros[:3], a2, atol=1e-12)
        assert abs(stats.zeros[3] - b2 ** 3) < 1e-12

    def test_uniform_behavior_zeros_nonnegative(self):
        b = BehaviorTensor(Scenario(2), np.full((2, 2, 2, 2), 0.25))
        stats = hardy_statistics(b)
        assert np.all(stats.zeros >= 0)

    def test_rejects_signaling_behavior(self):
        probs = np.zeros((2, 2, 2, 2))
        # party 1 outputs + iff party 2 measured U
        probs[:, 0, 0, 0] = 1.0
        probs[:, 1, 1, 0] = 1.0
        b = BehaviorTensor(Scenario(2), probs)
        with pytest.raises(ValidationError):
            hardy_statistics(b)


class TestNoSignaling:
    def test_uniform_zero(self):
        b = BehaviorTensor(Scenario(2), np.full((2, 2, 2, 2), 0.25))
        assert check_no_signaling(b).max_violation == 0.0

    def test_designed_violation(self):
        eps = 0.37
        probs = np.zeros((2, 2, 2, 2))
        # party 1 marginal moves by eps when party 2 flips setting
        probs[:, 0, 0, 0] = 1.0
        probs[:, 1, 0, 0] = 1.0 - eps
        probs[:, 1, 1, 0] = eps
        b = BehaviorTensor(Scenario(2), probs)
        report = check_no_signaling(b)
        assert abs(report.max_violation - eps) < 1e-12
        assert report.subset == (0,)

    def test_quantum_behaviors_pass(self):
        psi, m = optimal_setup(3)
        b = joint_distribution(psi, m)
        assert check_no_signaling(b).max_violation <= 1e-10


class TestMeasurementsFromObservables:
    def test_qubit_observables_match_pairs(self):
        pair = MeasurementPair.from_alpha_sq(0.6)
        u = np.diag([1.0, -1.0]).astype(complex)
        d = 2.0 * np.outer(pair.ket_plus, pair.ket_plus.conj()) - np.eye(2)
        m_obs = measurements_from_observables([(u, d)])
        m_pair = measurements_from_pairs([pair])
        for s in range(2):
            for o in range(2):
                assert np.allclose(m_obs.projectors[0][s][o],
                                   m_pair.projectors[0][s][o], atol=1e-12)

    def test_rejects_non_dichotomic(self):
        with pytest.raises(ValidationError):
            measurements_from_observables([(np.diag([1.0, 0.5]), np.eye(2))])

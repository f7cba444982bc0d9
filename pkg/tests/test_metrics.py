import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from graphunmix.metrics import (
    aad,
    evaluate,
    evaluate_factors,
    format_table,
    match_endmembers,
    rms_aad,
    rms_sad,
    sad,
)
from graphunmix.solvers import Factorization

nonneg_vec = arrays(np.float64, 5, elements=st.floats(0.0, 1e3)).filter(lambda v: v.sum() > 1e-3)


def angle_oracle(a, b):
    num = sum(x * y for x, y in zip(a, b))
    den = math.sqrt(sum(x * x for x in a)) * math.sqrt(sum(y * y for y in b))
    return math.acos(max(-1.0, min(1.0, num / den)))


def brute_force_perm(U_true, U_est):
    P = U_true.shape[1]
    best, best_cost = None, math.inf
    for perm in itertools.permutations(range(P)):
        cost = sum(angle_oracle(U_est[:, j], U_true[:, perm[j]]) for j in range(P))
        if cost < best_cost:
            best, best_cost = perm, cost
    return best, best_cost


class TestAngles:
    def test_sad_cases(self):
        assert sad([0.3, 0.4], [0.3, 0.4]) == 0.0
        assert abs(sad([1, 0], [0, 1]) - math.pi / 2) <= 1e-12
        assert abs(sad([1, 1], [1, 0]) - math.pi / 4) <= 1e-12

    def test_sad_zero(self):
        with pytest.raises(ValueError):
            sad([0, 0], [1, 0])

    def test_aad_cases(self):
        assert aad([0.2, 0.8], [0.2, 0.8]) == 0.0
        assert abs(aad([1, 0], [0, 1]) - math.pi / 2) <= 1e-12
        assert abs(aad([0.5, 0.5], [1, 0]) - math.pi / 4) <= 1e-12

    def test_aad_degenerate(self):
        assert aad([0, 0], [0, 0]) == 0.0
        assert aad([0, 0], [1, 0]) == math.pi / 2

    def test_parallel_vectors_tiny_angle(self):
        v = np.array([0.1, 0.2, 0.3]) * 3
        assert sad(v, v * 7) <= 1e-12
        assert sad(v, v * 7) >= 0

    @given(nonneg_vec, nonneg_vec, st.floats(1e-3, 1e3))
    def test_symmetry_scale_range(self, a, b, c):
        s = sad(a, b)
        assert 0 <= s <= math.pi / 2 + 1e-12
        assert s == pytest.approx(sad(b, a), abs=1e-12)
        assert s == pytest.approx(sad(c * a, b), abs=1e-7)
        assert aad(a, b) == pytest.approx(aad(b, c * a), abs=1e-7)


class TestMatching:
    def test_identity(self, rng):
        U = rng.random((10, 4))
        np.testing.assert_array_equal(match_endmembers(U, U), [0, 1, 2, 3])

    def test_swap(self, rng):
        U = rng.random((10, 3))
        np.testing.assert_array_equal(match_endmembers(U, U[:, [1, 0, 2]]), [1, 0, 2])

    def test_general_perm_mapping(self, rng):
        U = rng.random((10, 4))
        order = [2, 0, 3, 1]
        perm = match_endmembers(U, U[:, order])
        # estimated column j is true column order[j]
        np.testing.assert_array_equal(perm, order)

    @pytest.mark.parametrize("seed", range(10))
    def test_against_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        U_true, U_est = rng.random((8, 4)), rng.random((8, 4))
        perm = match_endmembers(U_true, U_est)
        best, cost = brute_force_perm(U_true, U_est)
        got = sum(angle_oracle(U_est[:, j], U_true[:, perm[j]]) for j in range(4))
        assert got == pytest.approx(cost, abs=1e-12)
        assert tuple(perm) == best

    def test_invariant_to_estimate_order(self, rng):
        U_true = rng.random((8, 4))
        U_est = U_true + 0.05 * rng.random((8, 4))
        base = match_endmembers(U_true, U_est)
        shuffle = rng.permutation(4)
        perm = match_endmembers(U_true, U_est[:, shuffle])
        np.testing.assert_array_equal(perm, base[shuffle])

    def test_shape_mismatch(self, rng):
        with pytest.raises(ValueError):
            match_endmembers(rng.random((5, 3)), rng.random((5, 4)))


class TestRms:
    def test_perfect(self, rng):
        U, V = rng.random((6, 3)), rng.dirichlet(np.ones(3), size=10)
        assert rms_sad(U, U, [0, 1, 2]) == 0.0
        assert rms_aad(V, V, [0, 1, 2]) == 0.0

    def test_closed_form_sad(self):
        U_true = np.array([[1.0, 1.0], [0.0, 0.0], [0.0, 1.0]])
        U_est = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]])
        # column angles: 0 and pi/4 -> use orthogonal second column for pi/2
        U_est[:, 1] = [0.0, 1.0, 0.0]
        assert rms_sad(U_true, U_est, [0, 1]) == pytest.approx(63.6396103, abs=1e-6)
        assert math.radians(rms_sad(U_true, U_est, [0, 1])) == pytest.approx(math.pi / (2 * math.sqrt(2)), abs=1e-12)

    def test_closed_form_aad(self):
        V_true = np.array([[1.0, 0.0]] * 4)
        V_est = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
        assert math.radians(rms_aad(V_true, V_est, [0, 1])) == pytest.approx(math.pi / (2 * math.sqrt(2)), abs=1e-12)

    def test_loop_oracles(self, rng):
        U_true, U_est = rng.random((9, 3)), rng.random((9, 3))
        V_true, V_est = rng.random((20, 3)), rng.random((20, 3))
        perm = [2, 0, 1]
        sads = [angle_oracle(U_true[:, perm[j]], U_est[:, j]) for j in range(3)]
        expected = math.degrees(math.sqrt(sum(s * s for s in sads) / 3))
        assert rms_sad(U_true, U_est, perm) == pytest.approx(expected, rel=1e-12)
        aligned = np.empty_like(V_est)
        for j in range(3):
            aligned[:, perm[j]] = V_est[:, j]
        aads = [angle_oracle(V_true[i], aligned[i]) for i in range(20)]
        expected = math.degrees(math.sqrt(sum(a * a for a in aads) / 20))
        assert rms_aad(V_true, V_est, perm) == pytest.approx(expected, rel=1e-12)


class _Scene:
    def __init__(self, U, V):
        self.true_endmembers, self.true_abundances = U, V


class TestEvaluate:
    def test_ground_truth(self, rng):
        U, V = rng.random((10, 3)), rng.dirichlet(np.ones(3), size=15)
        rep = evaluate(_Scene(U, V), Factorization(U, V), "GT")
        assert rep.rms_sad_deg == 0 and rep.rms_aad_deg == 0
        assert rep.permutation == (0, 1, 2)

    def test_permuted_truth(self, rng):
        U, V = rng.random((10, 3)), rng.dirichlet(np.ones(3), size=15)
        order = [1, 2, 0]
        rep = evaluate(_Scene(U, V), Factorization(U[:, order], V[:, order]))
        assert rep.rms_sad_deg == pytest.approx(0, abs=1e-6)
        assert rep.rms_aad_deg == pytest.approx(0, abs=1e-6)
        assert rep.permutation == tuple(order)

    def test_scaled_estimates(self, rng):
        U, V = rng.random((10, 3)), rng.dirichlet(np.ones(3), size=15)
        rep = evaluate_factors(U, V, U * [2.0, 0.5, 3.0], V * 4.0)
        assert rep.rms_sad_deg == pytest.approx(0, abs=1e-6)
        assert rep.rms_aad_deg == pytest.approx(0, abs=1e-6)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ValueError):
            evaluate_factors(rng.random((5, 4)), rng.random((6, 4)), rng.random((5, 3)), rng.random((6, 3)))

    def test_table(self, rng):
        U, V = rng.random((10, 3)), rng.dirichlet(np.ones(3), size=15)
        a = evaluate_factors(U, V, U, V, "NMF")
        b = evaluate_factors(U, V, U + 0.1, V, "GNMF")
        lines = format_table([a, b]).splitlines()
        assert lines[0].split() == ["NMF", "GNMF"]
        assert lines[1].startswith("rms_SAD") and lines[2].startswith("rms_AAD")
        assert lines[1].split()[-2] == "0.00"
        assert lines[1].split()[-1] == f"{b.rms_sad_deg:.2f}"

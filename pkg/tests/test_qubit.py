import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nonmarkov.qubit import (
    AffineMap,
    PAULI,
    apply_affine,
    binary_entropy,
    bloch_from_state,
    compose_affine,
    eigenvalues_2x2,
    entropy_of_norm,
    invert_affine,
    state_from_bloch,
    trace_norm,
    von_neumann_entropy,
)
from nonmarkov.sampling import random_states

finite = st.floats(-3, 3, allow_nan=False)


def random_hermitian(rng, n):
    a = rng.standard_normal((n, 2, 2)) + 1j * rng.standard_normal((n, 2, 2))
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def random_unitary(rng):
    q, r = np.linalg.qr(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


class TestStateConversion:
    def test_maximally_mixed(self):
        np.testing.assert_allclose(state_from_bloch([0, 0, 0]), 0.5 * np.eye(2), atol=0)

    def test_pole(self):
        np.testing.assert_allclose(state_from_bloch([0, 0, 1]), np.diag([1, 0]), atol=0)

    def test_outside_ball_is_representable(self):
        ev = eigenvalues_2x2(state_from_bloch([1.1, 0, 0]))
        np.testing.assert_allclose(ev, [1.05, -0.05], atol=1e-15)

    def test_inverse_examples(self):
        np.testing.assert_allclose(bloch_from_state(0.5 * np.eye(2)), [0, 0, 0], atol=0)
        np.testing.assert_allclose(bloch_from_state(np.diag([1.0, 0.0])), [0, 0, 1], atol=0)

    def test_round_trip(self, rng):
        r = random_states(rng, 10_000)
        rho = state_from_bloch(r)
        assert np.abs(bloch_from_state(rho) - r).max() < 1e-12
        assert np.abs(state_from_bloch(bloch_from_state(rho)) - rho).max() < 1e-12

    def test_matches_pauli_expansion(self, rng):
        r = random_states(rng, 50)
        expected = 0.5 * (np.eye(2) + np.einsum("ni,ijk->njk", r, PAULI))
        np.testing.assert_allclose(state_from_bloch(r), expected, atol=1e-15)

    def test_rejects_bad_trace(self):
        with pytest.raises(ValueError):
            bloch_from_state(np.diag([0.7, 0.7]))

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            bloch_from_state(np.array([[0.5, 0.3], [0.0, 0.5]]))

    def test_spectrum_is_exact(self, rng):
        r = random_states(rng, 10_000)
        n = np.linalg.norm(r, axis=1)
        ev = eigenvalues_2x2(state_from_bloch(r))
        np.testing.assert_allclose(ev[:, 0], (1 + n) / 2, atol=1e-12)
        np.testing.assert_allclose(ev[:, 1], (1 - n) / 2, atol=1e-12)


class TestSpectra:
    def test_identity(self):
        np.testing.assert_array_equal(eigenvalues_2x2(np.eye(2)), [1, 1])

    def test_diagonal(self):
        np.testing.assert_allclose(eigenvalues_2x2(np.diag([0.25, 0.75])), [0.75, 0.25])

    def test_against_characteristic_polynomial(self, rng):
        a = random_hermitian(rng, 2000)
        ev = eigenvalues_2x2(a)
        for m, e in zip(a, ev):
            tr = np.trace(m).real
            det = np.linalg.det(m).real
            roots = np.sort(np.roots([1.0, -tr, det]).real)[::-1]
            np.testing.assert_allclose(e, roots, atol=1e-12)

    def test_trace_norm_examples(self):
        assert trace_norm(np.zeros((2, 2))) == 0
        assert trace_norm(np.diag([0.5, -0.5])) == 1

    def test_trace_norm_against_svd(self, rng):
        rho = state_from_bloch(random_states(rng, 500))
        sigma = state_from_bloch(random_states(rng, 500))
        delta = 0.7 * rho - 0.3 * sigma
        svd = np.linalg.svd(delta, compute_uv=False).sum(axis=-1)
        assert np.abs(trace_norm(delta) - svd).max() < 1e-12

    def test_trace_norm_is_a_norm(self, rng):
        a, b = random_hermitian(rng, 1000), random_hermitian(rng, 1000)
        c = rng.normal(size=1000)
        assert np.all(trace_norm(a + b) <= trace_norm(a) + trace_norm(b) + 1e-12)
        np.testing.assert_allclose(trace_norm(c[:, None, None] * a), np.abs(c) * trace_norm(a), rtol=1e-12)


class TestEntropy:
    def test_binary_entropy_values(self):
        assert binary_entropy(0.0) == 0 and binary_entropy(1.0) == 0
        assert binary_entropy(0.5) == 1
        assert binary_entropy(0.25) == pytest.approx(0.8112781244591328, abs=1e-12)

    @given(st.floats(0, 1))
    def test_binary_entropy_symmetric(self, p):
        assert binary_entropy(p) == pytest.approx(binary_entropy(1 - p), abs=1e-15)

    @pytest.mark.parametrize("p", [-0.1, 1.1, float("nan")])
    def test_binary_entropy_domain(self, p):
        with pytest.raises(ValueError):
            binary_entropy(p)

    def test_von_neumann_values(self):
        assert von_neumann_entropy(np.diag([1.0, 0.0])) == 0
        assert von_neumann_entropy(0.5 * np.eye(2)) == 1
        assert von_neumann_entropy(state_from_bloch([0.5, 0, 0])) == pytest.approx(0.8112781244591328, abs=1e-12)

    def test_matrix_and_bloch_agree(self, rng):
        r = random_states(rng, 1000)
        np.testing.assert_allclose(von_neumann_entropy(state_from_bloch(r)), von_neumann_entropy(r), atol=1e-12)

    def test_basis_independent(self, rng):
        for _ in range(200):
            e = rng.random()
            rho = np.diag([e, 1 - e]).astype(complex)
            u = random_unitary(rng)
            rotated = u @ rho @ u.conj().T
            assert abs(von_neumann_entropy(rotated) - von_neumann_entropy(rho)) < 1e-10

    def test_clamps_roundoff_and_rejects_negativity(self):
        assert von_neumann_entropy(np.diag([1 + 5e-11, -5e-11])) == pytest.approx(0.0, abs=1e-9)
        with pytest.raises(ValueError):
            von_neumann_entropy(np.diag([1.01, -0.01]))
        assert entropy_of_norm(1 + 1e-10) == 0
        with pytest.raises(ValueError):
            entropy_of_norm(1.001)


class TestAffine:
    def test_identity(self, rng):
        r = random_states(rng, 10)
        np.testing.assert_array_equal(apply_affine(AffineMap.identity(), r), r)

    def test_expanding_map(self):
        m = AffineMap.from_lambdas(1.1, 1.1, 0.1)
        np.testing.assert_allclose(m([1, 0, 0]), [1.1, 0, 0])

    @given(arrays(float, 12, elements=finite), arrays(float, 3, elements=finite))
    def test_composition(self, p, r):
        m1 = AffineMap(p[:3], p[3:6])
        m2 = AffineMap(p[6:9], p[9:])
        np.testing.assert_allclose(compose_affine(m2, m1)(r), m2(m1(r)), atol=1e-12)

    def test_invert_examples(self):
        assert invert_affine(AffineMap.identity()).allclose(AffineMap.identity())
        inv = invert_affine(AffineMap(np.full(3, 0.5), np.array([0, 0, 0.2])))
        assert inv.allclose(AffineMap(np.full(3, 2.0), np.array([0, 0, -0.4])))

    def test_invert_round_trip(self, rng):
        for _ in range(1000):
            m = AffineMap(rng.uniform(0.1, 2, 3) * rng.choice([-1, 1], 3), rng.normal(size=3))
            assert compose_affine(m, invert_affine(m)).allclose(AffineMap.identity(), atol=1e-12)
            assert compose_affine(invert_affine(m), m).allclose(AffineMap.identity(), atol=1e-12)

    def test_invert_singular(self):
        with pytest.raises(ValueError):
            invert_affine(AffineMap.from_lambdas(1, 0, 1))

    def test_sphere_maps_to_ellipsoid(self, rng):
        lam = rng.uniform(-2, 2, 3)
        u = random_states(rng, 1000)
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        img = AffineMap(lam, np.zeros(3))(u)
        np.testing.assert_allclose(np.sum((img / lam) ** 2, axis=1), 1, atol=1e-12)

    def test_batched_maps(self):
        m = AffineMap(np.array([[1.0, 1, 1], [0.5, 0.5, 2]]), np.zeros((2, 3)))
        np.testing.assert_allclose(m(np.array([1.0, 1, 1])), [[1, 1, 1], [0.5, 0.5, 2]])
        assert m[1].allclose(AffineMap.from_lambdas(0.5, 0.5, 2))

import numpy as np
import pytest

from sem_engine import (
    GumbelMask,
    InterventionMask,
    LinearSem,
    MlpSem,
    backprop,
    draw_mask,
    epsilon_observed,
    expected_mask,
    forward_f,
    gradients,
    hard_mask,
    model_from_sections,
    model_sections,
    read_document,
    sample_mask,
    solve_fixed_point,
    spectral_normalize,
    write_document,
)
from shared.exceptions import DataError, DimensionMismatchError, FixedPointError

FULL2 = np.ones((2, 2)) - np.eye(2)


def _chain(b=0.5):
    return LinearSem(np.array([[0.0, b], [0.0, 0.0]]))


def _two_cycle(b=0.5):
    return LinearSem(np.array([[0.0, b], [b, 0.0]]))


def _random_mlp(k=3, hidden=4, seed=0, activation="tanh"):
    rng = np.random.default_rng(seed)
    return MlpSem(
        w1=0.5 * rng.standard_normal((k, hidden)),
        b1=0.1 * rng.standard_normal(hidden),
        w2=0.5 * rng.standard_normal((hidden, k)),
        b2=0.1 * rng.standard_normal(k),
        activation=activation,
    )


def _relative_error(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-8)


class TestMasks:
    def test_saturated_logits_give_ones(self):
        mask = GumbelMask(np.full((3, 3), 1e6), temperature=5.0)
        values = sample_mask(mask, np.random.default_rng(0))
        off = ~np.eye(3, dtype=bool)
        assert np.all(values[off] == 1.0)

    def test_diagonal_is_always_zero(self):
        mask = GumbelMask(np.full((4, 4), 1e6))
        rng = np.random.default_rng(1)
        for _ in range(10):
            assert np.all(np.diag(sample_mask(mask, rng)) == 0.0)
        assert np.all(np.diag(expected_mask(mask)) == 0.0)

    def test_zero_logits_mean_is_half(self):
        mask = GumbelMask.zeros(2)
        rng = np.random.default_rng(2)
        draws = np.array([sample_mask(mask, rng)[0, 1] for _ in range(10000)])
        assert 0.45 <= draws.mean() <= 0.55

    def test_hard_mask_is_binary(self):
        mask = GumbelMask(np.array([[0.0, 2.0], [-2.0, 0.0]]), hard=True)
        sample = draw_mask(mask, np.random.default_rng(3))
        assert set(np.unique(sample.values)) <= {0.0, 1.0}
        assert np.array_equal(hard_mask(mask), np.array([[0.0, 1.0], [0.0, 0.0]]))


class TestForward:
    def test_zero_mask_linear_is_zero(self):
        model = _two_cycle()
        assert np.array_equal(forward_f(model, np.zeros((2, 2)), np.array([3.0, -1.0])), np.zeros(2))

    def test_zero_mask_mlp_is_constant(self):
        model = _random_mlp()
        mask = np.zeros((3, 3))
        a = forward_f(model, mask, np.array([1.0, 2.0, 3.0]))
        b = forward_f(model, mask, np.array([-4.0, 0.5, 9.0]))
        assert np.allclose(a, b)

    def test_single_edge(self):
        assert np.allclose(forward_f(_chain(), FULL2, np.array([2.0, 7.0])), [0.0, 1.0])

    def test_identity_mlp_matches_matrix_product(self):
        model = _random_mlp(activation="identity")
        mask = np.ones((3, 3)) - np.eye(3)
        x = np.random.default_rng(4).standard_normal(3)
        expected = np.zeros(3)
        for k in range(3):
            hidden = (x * mask[:, k]) @ model.w1 + model.b1
            expected[k] = hidden @ model.w2[:, k] + model.b2[k]
        assert np.max(np.abs(forward_f(model, mask, x) - expected)) < 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            forward_f(_chain(), FULL2, np.zeros(3))


class TestSpectralNormalize:
    def test_tiny_weights_unchanged(self):
        model = LinearSem(0.01 * (np.ones((3, 3)) - np.eye(3)))
        assert spectral_normalize(model) is model

    def test_single_layer_scaled_to_target(self):
        b = np.array([[0.0, 10.0, 0.0], [0.0, 0.0, 1.0], [2.0, 0.0, 0.0]])
        scaled = spectral_normalize(LinearSem(b, lipschitz_target=0.9))
        assert np.linalg.norm(scaled.b, 2) == pytest.approx(0.9, abs=1e-6)

    def test_two_layers_share_budget(self):
        w = np.diag([2.0, 1.0, 0.5])
        model = MlpSem(w1=w, b1=np.zeros(3), w2=w, b2=np.zeros(3), lipschitz_target=0.9)
        scaled = spectral_normalize(model)
        assert np.linalg.norm(scaled.w1, 2) == pytest.approx(np.sqrt(0.9), abs=1e-5)
        assert np.linalg.norm(scaled.w2, 2) == pytest.approx(np.sqrt(0.9), abs=1e-5)
        assert scaled.lipschitz_bound() <= 0.9 + 1e-9

    def test_rejects_zero_iterations(self):
        with pytest.raises(ValueError):
            spectral_normalize(_chain(), power_iters=0)

    def test_shared_mask_network_is_contractive(self):
        rng = np.random.default_rng(8)
        model = spectral_normalize(MlpSem.initialize(5, 8, rng, scale=1.0, lipschitz_target=0.9))
        mask = np.ones((5, 5))
        lipschitz = np.linalg.norm(model.w1, 2) * np.linalg.norm(model.w2, 2)
        assert lipschitz <= 0.9 + 1e-4
        for _ in range(200):
            x, y = 3.0 * rng.standard_normal((2, 5))
            gap = np.linalg.norm(forward_f(model, mask, x) - forward_f(model, mask, y))
            assert gap <= lipschitz * np.linalg.norm(x - y) + 1e-9

    def test_masked_jacobian_stays_within_frobenius_bound(self):
        rng = np.random.default_rng(9)
        model = spectral_normalize(MlpSem.initialize(5, 8, rng, scale=1.0, lipschitz_target=0.9))
        bound = np.linalg.norm(model.w1, 2) * np.linalg.norm(model.w2)
        for _ in range(100):
            mask = rng.random((5, 5))
            np.fill_diagonal(mask, 0.0)
            x = 2.0 * rng.standard_normal(5)
            jacobian = model.jvp(np.repeat(x[None, :], 5, axis=0), mask, np.eye(5)).T
            assert np.linalg.norm(jacobian, 2) <= bound + 1e-9

    def test_masked_linear_within_frobenius_bound(self):
        rng = np.random.default_rng(10)
        model = spectral_normalize(LinearSem.initialize(6, rng, scale=1.0, lipschitz_target=0.9))
        for _ in range(100):
            mask = (rng.random((6, 6)) < 0.5).astype(float)
            assert np.linalg.norm(model.b * mask, 2) <= np.linalg.norm(model.b) + 1e-9


class TestEpsilonObserved:
    def test_zero_mechanism(self):
        iv = InterventionMask.observational(2)
        x = np.array([0.3, -1.2])
        assert np.array_equal(epsilon_observed(_chain(), np.zeros((2, 2)), x, iv), x)

    def test_all_intervened(self):
        iv = InterventionMask.from_targets(2, [0, 1], [1.0, 2.0])
        assert epsilon_observed(_chain(), FULL2, np.array([1.0, 2.0]), iv).size == 0

    def test_chain(self):
        iv = InterventionMask.observational(2)
        assert np.allclose(epsilon_observed(_chain(), FULL2, np.array([1.0, 1.5]), iv), [1.0, 1.0])


class TestSolveFixedPoint:
    def test_zero_mechanism(self):
        iv = InterventionMask.from_targets(3, [1], [4.0])
        eps = np.array([0.5, 9.0, -1.0])
        model = LinearSem(np.zeros((3, 3)))
        x = solve_fixed_point(model, np.ones((3, 3)) - np.eye(3), iv, eps)
        assert np.array_equal(x, np.array([0.5, 4.0, -1.0]))

    def test_two_cycle(self):
        x = solve_fixed_point(_two_cycle(), FULL2, InterventionMask.observational(2), np.array([1.0, 1.0]), tol=1e-12)
        assert np.allclose(x, [2.0, 2.0], atol=1e-9)

    def test_acyclic_matches_linear_solve(self):
        rng = np.random.default_rng(5)
        b = np.triu(rng.uniform(-1.5, 1.5, (5, 5)), 1)
        model = LinearSem(b, is_contractive=False)
        eps = rng.standard_normal(5)
        mask = np.ones((5, 5)) - np.eye(5)
        x = solve_fixed_point(model, mask, InterventionMask.observational(5), eps, tol=1e-12)
        assert np.allclose(x, np.linalg.solve(np.eye(5) - b.T, eps), atol=1e-9)

    def test_intervention_clamps_and_cuts(self):
        iv = InterventionMask.from_targets(2, [0], [3.0])
        x = solve_fixed_point(_two_cycle(), FULL2, iv, np.array([100.0, 1.0]))
        assert x[0] == 3.0
        assert x[1] == pytest.approx(2.5)

    def test_batch(self):
        eps = np.random.default_rng(6).standard_normal((10, 2))
        x = solve_fixed_point(_two_cycle(), FULL2, InterventionMask.observational(2), eps, tol=1e-12)
        expected = np.linalg.solve(np.eye(2) - _two_cycle().b.T, eps.T).T
        assert np.allclose(x, expected, atol=1e-9)

    def test_divergence_raises(self):
        model = LinearSem(np.array([[0.0, 2.0], [2.0, 0.0]]), is_contractive=False)
        with pytest.raises(FixedPointError):
            solve_fixed_point(model, FULL2, InterventionMask.observational(2), np.ones(2), max_iter=200)


class TestGradients:
    def test_zero_input_gives_zero_linear_gradient(self):
        model = _two_cycle()
        x = np.zeros((1, 2))
        adjoint = 2.0 * forward_f(model, FULL2, x)
        grads, _ = model.vjp(x, FULL2, adjoint)
        assert np.array_equal(grads["b"], np.zeros((2, 2)))

    @pytest.mark.parametrize("seed", range(5))
    def test_mlp_vjp_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        model = _random_mlp(seed=seed)
        mask = rng.uniform(0.2, 1.0, (3, 3))
        np.fill_diagonal(mask, 0.0)
        x = rng.standard_normal((4, 3))
        g = rng.standard_normal((4, 3))
        grads, grad_m = model.vjp(x, mask, g)

        def objective(params, m=mask):
            return float(np.sum(g * model.with_params(params).forward(x, m)))

        h = 1e-5
        for name, value in model.params().items():
            fd = np.zeros_like(value)
            for idx in np.ndindex(value.shape):
                up, down = value.copy(), value.copy()
                up[idx] += h
                down[idx] -= h
                fd[idx] = (objective({**model.params(), name: up}) - objective({**model.params(), name: down})) / (2 * h)
            assert _relative_error(grads[name], fd) < 1e-4
        fd_m = np.zeros_like(mask)
        for idx in np.ndindex(mask.shape):
            up, down = mask.copy(), mask.copy()
            up[idx] += h
            down[idx] -= h
            fd_m[idx] = (objective(model.params(), up) - objective(model.params(), down)) / (2 * h)
        assert _relative_error(grad_m, fd_m) < 1e-4

    def test_mlp_bilinear_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        model = _random_mlp(seed=11)
        mask = np.ones((3, 3)) - np.eye(3)
        x, u, v = (rng.standard_normal((3, 3)) for _ in range(3))
        grads, _ = model.bilinear_grad(x, mask, u, v)

        def objective(params):
            return float(np.sum(u * model.with_params(params).jvp(x, mask, v)))

        h = 1e-5
        for name, value in model.params().items():
            fd = np.zeros_like(value)
            for idx in np.ndindex(value.shape):
                up, down = value.copy(), value.copy()
                up[idx] += h
                down[idx] -= h
                fd[idx] = (objective({**model.params(), name: up}) - objective({**model.params(), name: down})) / (2 * h)
            assert np.max(np.abs(grads[name] - fd)) < 1e-4 * max(np.max(np.abs(fd)), 1.0)

    def test_jvp_and_vjp_input_are_adjoint(self):
        rng = np.random.default_rng(12)
        model = _random_mlp(seed=12)
        mask = np.ones((3, 3)) - np.eye(3)
        x, u, v = (rng.standard_normal((5, 3)) for _ in range(3))
        lhs = np.sum(u * model.jvp(x, mask, v))
        rhs = np.sum(model.vjp_input(x, mask, u) * v)
        assert lhs == pytest.approx(rhs, rel=1e-10)

    def test_diagonal_logit_gradient_is_zero(self):
        model = _random_mlp(seed=3)
        mask = GumbelMask.zeros(3)
        sample = draw_mask(mask, np.random.default_rng(0))
        x = np.random.default_rng(1).standard_normal((4, 3))
        _, grad_logits = gradients(model, sample, x, adjoint=np.ones((4, 3)))
        assert np.all(np.diag(grad_logits) == 0.0)

    def test_precomputed_bundle_scales_like_the_adjoint(self):
        model = _random_mlp(seed=5)
        sample = draw_mask(GumbelMask.zeros(3), np.random.default_rng(2))
        x = np.random.default_rng(3).standard_normal((6, 3))
        adjoint = np.random.default_rng(4).standard_normal((6, 3))
        params, logits = gradients(model, sample, x, adjoint=0.25 * adjoint)
        bundle = backprop(model, sample.values, x, adjoint).scale(0.25)
        split_params, split_logits = gradients(model, sample, x, bundle=bundle)
        assert split_params.keys() == params.keys()
        for name in params:
            np.testing.assert_allclose(split_params[name], params[name], rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(split_logits, logits, rtol=1e-12, atol=1e-14)


class TestCheckpointDocument:
    def test_mlp_document_round_trip(self, tmp_path):
        model = _random_mlp(seed=8)
        mask = GumbelMask(np.random.default_rng(8).standard_normal((3, 3)), temperature=0.5)
        path = write_document(str(tmp_path / "doc.json"), model_sections(model, mask))
        restored = model_from_sections(read_document(path))
        for name, value in model.params().items():
            assert np.array_equal(getattr(restored, name), value)

    def test_rejects_foreign_document(self, tmp_path):
        path = tmp_path / "other.json"
        path.write_text('{"format": "something-else", "version": 1}')
        with pytest.raises(DataError):
            read_document(str(path))

import copy
import logging

import numpy as np
import pytest

import em_trainer.trainer as trainer_module
from em_trainer import (
    AdamOptimizer,
    EMTrainer,
    FitState,
    TrainConfig,
    enforce_acyclic,
    extract_graph,
    initialize_state,
    load_state,
    objective_report,
    penalized_objective,
    q_objective,
    q_objective_rows,
    q_objective_with_grad,
    run_em,
    run_em_dag,
    save_state,
    state_from_document,
    train_config_from_document,
)
from estep_imputation import ImputedBatch
from graph_model import EdgePattern, is_acyclic, shd
from missing_mechanism import MnarModel, log_prob_r_rows
from sem_engine import GumbelMask, InterventionMask, LinearSem, MlpSem, read_document, spectral_normalize
from shared.exceptions import ConfigError, NonFiniteGradientError
from synthetic_bench import Dataset, InstanceSpec, gen_instance, simulate
from target_likelihood import NoiseModel, log_density_rows


def _state(b, logits=None, w=None, z=None, noise=None):
    k = b.shape[0]
    return FitState(
        model=LinearSem(np.asarray(b, dtype=float)),
        mask=GumbelMask(np.zeros((k, k)) if logits is None else logits),
        noise=noise if noise is not None else NoiseModel.isotropic(k, 1.0),
        mnar=MnarModel(np.zeros((k, k)) if w is None else w, np.zeros(k) if z is None else z),
        optimizer=AdamOptimizer(learning_rate=0.01),
    )


def _batch(seed=0, n=8, k=3):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, k))
    r = (rng.random((n, k)) > 0.3).astype(np.int8)
    s = np.ones((n, k), dtype=np.int8)
    s[0, 1] = 0
    r[0, 1] = 1
    return ImputedBatch.pass_through(x, r, s)


def _simulated(k=3, rate=0.0, n=40, seed=0, mechanism="mnar"):
    spec = InstanceSpec(k=k, n_per_intervention=n, missing_rate=rate, seed=seed, mechanism=mechanism)
    truth = gen_instance(spec)
    return simulate(truth, spec), truth


def _fast(**overrides):
    settings = {"epochs": 2, "batch_size": 64, "threads": 1}
    settings.update(overrides)
    return TrainConfig(**settings)


class TestTrainConfig:
    def test_gaussian_exact_needs_linear_model(self):
        with pytest.raises(ConfigError):
            TrainConfig(estep_mode="gaussian-exact", model="mlp")

    def test_exact_logdet_needs_linear_model(self):
        with pytest.raises(ConfigError):
            TrainConfig(logdet_mode="exact", model="mlp")

    def test_nested_sections_from_dicts(self):
        cfg = TrainConfig(rejection={"max_attempts": 7}, logdet={"num_hutchinson": 3})
        assert cfg.rejection.max_attempts == 7
        assert cfg.logdet.num_hutchinson == 3

    def test_temperature_anneal(self):
        cfg = TrainConfig(epochs=5, temperature=1.0, temperature_final=0.5)
        assert cfg.temperature_at(0) == pytest.approx(1.0)
        assert cfg.temperature_at(2) == pytest.approx(0.75)
        assert cfg.temperature_at(4) == pytest.approx(0.5)
        assert TrainConfig(epochs=5).temperature_at(4) == 1.0


class TestQObjective:
    def test_single_node_closed_form(self):
        state = _state(np.zeros((1, 1)))
        batch = ImputedBatch.pass_through(np.zeros((1, 1)), np.ones((1, 1)), np.ones((1, 1)))
        assert q_objective(batch, state, TrainConfig(threads=1)) == pytest.approx(-1.612086, abs=1e-6)

    def test_matches_density_plus_mechanism(self):
        b = np.array([[0.0, 0.4, 0.0], [0.0, 0.0, -0.3], [0.2, 0.0, 0.0]])
        state = _state(b, logits=np.full((3, 3), 2.0))
        batch = _batch()
        cfg = TrainConfig(threads=1)
        mask = 1.0 / (1.0 + np.exp(-2.0)) * (np.ones((3, 3)) - np.eye(3))
        iv = InterventionMask.from_indicators(batch.s, batch.x)
        expected = log_density_rows(state.model, mask, state.noise, batch.x, iv) + log_prob_r_rows(
            state.mnar, batch.r, batch.x, skip=batch.s == 0
        )
        assert q_objective(batch, state, cfg) == pytest.approx(float(expected.mean()), abs=1e-12)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        b = 0.3 * rng.standard_normal((3, 3))
        np.fill_diagonal(b, 0.0)
        logits = rng.standard_normal((3, 3))
        w = 0.5 * rng.standard_normal((3, 3))
        np.fill_diagonal(w, 0.0)
        z = rng.standard_normal(3)
        batch = _batch(seed=3)
        cfg = TrainConfig(threads=1)
        _, grad = q_objective_with_grad(batch, _state(b, logits, w, z), cfg)
        h = 1e-6

        def value(**changes):
            args = {"b": b, "logits": logits, "w": w, "z": z}
            args.update(changes)
            return q_objective(batch, _state(**args), cfg)

        for j in range(3):
            for k in range(3):
                if j == k:
                    continue
                bump = np.zeros((3, 3))
                bump[j, k] = h
                fd_b = (value(b=b + bump) - value(b=b - bump)) / (2 * h)
                fd_g = (value(logits=logits + bump) - value(logits=logits - bump)) / (2 * h)
                fd_w = (value(w=w + bump) - value(w=w - bump)) / (2 * h)
                assert grad.theta["model.b"][j, k] == pytest.approx(fd_b, rel=1e-5, abs=1e-8)
                assert grad.theta["mask.logits"][j, k] == pytest.approx(fd_g, rel=1e-5, abs=1e-8)
                assert grad.phi["mnar.w"][j, k] == pytest.approx(fd_w, rel=1e-5, abs=1e-8)
        for k in range(3):
            bump = np.zeros(3)
            bump[k] = h
            fd_z = (value(z=z + bump) - value(z=z - bump)) / (2 * h)
            assert grad.phi["mnar.z"][k] == pytest.approx(fd_z, rel=1e-5, abs=1e-8)

    def test_penalty_lowers_objective(self):
        state = _state(np.zeros((2, 2)), logits=np.zeros((2, 2)))
        batch = ImputedBatch.pass_through(np.zeros((3, 2)), np.ones((3, 2)), np.ones((3, 2)))
        penalized, _, raw = penalized_objective(batch, state, TrainConfig(lambda1=1.0, threads=1))
        # two off-diagonal entries at sigmoid(0)
        assert raw - penalized == pytest.approx(1.0)

    def test_proxy_loglik_uses_fully_observed_rows(self):
        state = _state(np.array([[0.0, 0.5], [0.0, 0.0]]))
        x = np.array([[0.2, -0.1], [1.0, 0.3], [-0.4, 0.8]])
        r = np.array([[1, 1], [1, 0], [1, 1]])
        batch = ImputedBatch.pass_through(x, r, np.ones((3, 2)))
        cfg = TrainConfig(threads=1)
        report = objective_report(batch, state, cfg)
        rows = q_objective_rows(batch, state, cfg)
        assert report["q_value"] == pytest.approx(rows.mean())
        assert report["proxy_loglik"] == pytest.approx(rows[[0, 2]].mean())

    def test_proxy_loglik_is_nan_without_complete_rows(self):
        batch = ImputedBatch.pass_through(np.zeros((2, 2)), np.array([[0, 1], [1, 0]]), np.ones((2, 2)))
        report = objective_report(batch, _state(np.zeros((2, 2))), TrainConfig(threads=1))
        assert np.isnan(report["proxy_loglik"])
        assert np.isfinite(report["q_value"])


GRADIENT_CASES = [("mlp", "stochastic"), ("linear", "stochastic"), ("linear", "exact")]
SQUARE_TENSORS = ("model.b", "mask.logits", "mnar.w")


def _random_fit(kind, seed, k=10, hidden=6):
    rng = np.random.default_rng(seed)
    if kind == "mlp":
        model = MlpSem.initialize(k, hidden, rng, scale=0.5, activation="tanh", lipschitz_target=0.9)
    else:
        model = LinearSem.initialize(k, rng, scale=0.3, lipschitz_target=0.9)
    logits = rng.standard_normal((k, k))
    w = 0.5 * rng.standard_normal((k, k))
    for square in (logits, w):
        np.fill_diagonal(square, 0.0)
    state = FitState(
        model=spectral_normalize(model),
        mask=GumbelMask(logits),
        noise=NoiseModel(np.exp(0.3 * rng.standard_normal(k)), learnable=True),
        mnar=MnarModel(w, rng.standard_normal(k)),
        optimizer=AdamOptimizer(learning_rate=0.01),
    )
    n = 16
    x = rng.standard_normal((n, k))
    r = (rng.random((n, k)) > 0.3).astype(np.int8)
    s = np.ones((n, k), dtype=np.int8)
    s[np.arange(n), np.arange(n) % k] = 0
    r[s == 0] = 1
    return state, ImputedBatch.pass_through(x, r, s), rng


def _bumped(state, name, index, step):
    moved = copy.deepcopy(state)
    theta, phi = moved.theta(), moved.phi()
    group = theta if name in theta else phi
    value = np.array(group[name], dtype=float)
    value[index] += step
    group[name] = value
    return moved.with_theta(theta).with_phi(phi)


class TestQGradientSweep:
    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(50))
    @pytest.mark.parametrize("k", [3, 10])
    @pytest.mark.parametrize("kind,logdet_mode", GRADIENT_CASES)
    def test_every_entry_matches_central_differences(self, kind, logdet_mode, k, seed):
        state, batch, _ = _random_fit(kind, seed, k=k)
        cfg = TrainConfig(model=kind, logdet_mode=logdet_mode, logdet={"num_hutchinson": 2}, threads=1)
        _, grad = q_objective_with_grad(batch, state, cfg, rng=np.random.default_rng(seed))
        analytic = {**grad.theta, **grad.phi}
        h = 1e-5
        for name, value in {**state.theta(), **state.phi()}.items():
            for index in np.ndindex(np.shape(value)):
                if name in SQUARE_TENSORS and index[0] == index[1]:
                    continue
                upper = q_objective(batch, _bumped(state, name, index, h), cfg, rng=np.random.default_rng(seed))
                lower = q_objective(batch, _bumped(state, name, index, -h), cfg, rng=np.random.default_rng(seed))
                fd = (upper - lower) / (2 * h)
                assert analytic[name][index] == pytest.approx(fd, rel=1e-4, abs=1e-7), f"{name}{index}"


class TestAdamOptimizer:
    def test_zero_learning_rate_keeps_parameters(self):
        params = {"a": np.array([1.0, -2.0])}
        updated = AdamOptimizer(learning_rate=0.0).ascend(params, {"a": np.array([3.0, 4.0])})
        assert np.array_equal(updated["a"], params["a"])

    def test_first_step_moves_by_learning_rate_along_gradient(self):
        updated = AdamOptimizer(learning_rate=0.1).ascend({"a": np.zeros(2)}, {"a": np.array([5.0, -0.01])})
        assert np.allclose(updated["a"], [0.1, -0.1], atol=1e-5)

    def test_tensors_without_gradient_are_untouched(self):
        params = {"a": np.zeros(1), "b": np.ones(1)}
        updated = AdamOptimizer(learning_rate=0.1).ascend(params, {"a": np.ones(1)})
        assert updated["b"] is params["b"]

    def test_non_finite_gradient(self):
        with pytest.raises(NonFiniteGradientError):
            AdamOptimizer(learning_rate=0.1).ascend({"a": np.zeros(2)}, {"a": np.array([np.nan, 1.0])})

    def test_moments_round_trip(self):
        optimizer = AdamOptimizer(learning_rate=0.1)
        optimizer.ascend({"a": np.zeros(2)}, {"a": np.array([1.0, 2.0])})
        restored = AdamOptimizer.from_dict(optimizer.to_dict())
        assert restored.steps == {"a": 1}
        assert np.array_equal(restored.first["a"], optimizer.first["a"])


class TestTrainer:
    def test_history_and_estep_on_missing_data(self):
        data, _ = _simulated(rate=0.2, n=20)
        state = run_em(data, _fast())
        assert len(state.history) == 2
        assert state.history[0]["imputed_records"] > 0
        assert state.model.lipschitz_bound() <= state.model.lipschitz_target + 1e-6

    def test_pass_through_is_logged(self, caplog):
        data, _ = _simulated()
        caplog.set_level(logging.INFO)
        run_em(data, _fast(epochs=1))
        assert "E-step pass-through (no missing entries)" in caplog.text

    def test_pass_through_keeps_values(self):
        data, _ = _simulated(rate=0.2, n=20)
        filled = Dataset(np.nan_to_num(data.y), data.r, data.s, pre_imputed=True)
        trainer = EMTrainer(_fast())
        imputed = trainer.e_step(filled, initialize_state(filled, trainer.cfg), epoch=0)
        assert np.array_equal(imputed.x, filled.y)
        assert imputed.acceptance_stats()["records"] == int(np.any(filled.r == 0, axis=1).sum())
        assert np.all(imputed.attempts == 1)

    def test_deterministic(self):
        data, _ = _simulated(rate=0.2, n=20)
        first = run_em(data, _fast(seed=3))
        second = run_em(data, _fast(seed=3))
        assert np.array_equal(first.parameter_vector(), second.parameter_vector())

    def test_large_l1_penalty_empties_graph(self):
        data, _ = _simulated(k=4)
        state = run_em(data, _fast(lambda1=100.0))
        target, _ = extract_graph(state, 0.1)
        assert target.num_edges == 0

    def test_gaussian_exact_refused_for_mnar_data(self):
        data, _ = _simulated(rate=0.2, n=20)
        with pytest.raises(ConfigError):
            run_em(data, _fast(estep_mode="gaussian-exact"))

    def test_gaussian_exact_on_mar_data(self):
        data, _ = _simulated(rate=0.2, n=20, mechanism="mar")
        state = run_em(data, _fast(estep_mode="gaussian-exact"))
        assert state.history[-1]["imputed_records"] > 0
        assert state.history[-1]["mean_attempts"] == 1.0

    def test_early_stop(self):
        data, _ = _simulated()
        state = run_em(data, _fast(epochs=5, early_stop=True, early_stop_tol=1e3, early_stop_patience=1))
        assert len(state.history) == 1

    def test_aborted_epochs(self, monkeypatch):
        def failing(*args, **kwargs):
            raise NonFiniteGradientError("non-finite gradient for 'model.b'")

        monkeypatch.setattr(trainer_module, "m_step", failing)
        data, _ = _simulated()
        state = run_em(data, _fast(epochs=2))
        assert [record["aborted"] for record in state.history] == [True, True]
        with pytest.raises(NonFiniteGradientError):
            run_em(data, _fast(epochs=3))

    def test_resume_matches_uninterrupted_run(self, tmp_path):
        data, _ = _simulated(rate=0.2, n=20)
        straight = run_em(data, _fast(epochs=3))
        partial = run_em(data, _fast(epochs=2))
        path = save_state(partial, str(tmp_path / "checkpoint.json"), _fast(epochs=2))
        resumed = EMTrainer(_fast(epochs=3)).fit(data, load_state(path))
        assert resumed.epoch == 3
        assert np.allclose(resumed.parameter_vector(), straight.parameter_vector(), rtol=0, atol=1e-10)


class TestDagVariant:
    def test_zero_weight_matches_plain_run(self):
        data, _ = _simulated()
        plain = run_em(data, _fast())
        dag = run_em_dag(data, _fast(lambda_dag=0.0))
        assert np.array_equal(plain.parameter_vector(), dag.parameter_vector())

    def test_extracted_graph_is_acyclic(self):
        data, _ = _simulated(k=4, seed=2)
        state = run_em_dag(data, _fast(epochs=3, lambda_dag=1.0, lambda1=0.0))
        target, _ = extract_graph(state, 0.1)
        assert is_acyclic(target)

    def test_enforce_acyclic_drops_weaker_edge(self):
        b = np.array([[0.0, 0.6], [0.3, 0.0]])
        state = enforce_acyclic(_state(b, logits=np.full((2, 2), 3.0)), TrainConfig(lambda_dag=1.0, threads=1))
        target, _ = extract_graph(state, 0.1)
        assert target.edge_list() == [(0, 1)]
        assert state.mask.logits[1, 0] == trainer_module.PRUNED_LOGIT


class TestExtraction:
    def test_fresh_state_has_no_edges(self):
        data, _ = _simulated()
        target, m_edges = extract_graph(initialize_state(data, _fast()), 0.1)
        assert target.num_edges == 0

    def test_planted_parameters(self):
        b = np.array([[0.0, 0.5, 0.0], [0.0, 0.0, -0.5], [0.0, 0.0, 0.0]])
        logits = np.where(b != 0, 30.0, -30.0)
        w = np.zeros((3, 3))
        w[2, 0] = 1.0
        target, m_edges = extract_graph(_state(b, logits=logits, w=w), 0.1)
        assert target.edge_list() == [(0, 1), (1, 2)]
        assert m_edges.edge_list() == [(2, 0)]

    def test_weak_weights_are_cut(self):
        b = np.array([[0.0, 0.05], [0.0, 0.0]])
        target, _ = extract_graph(_state(b, logits=np.full((2, 2), 30.0)), 0.1)
        assert target.num_edges == 0


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        data, _ = _simulated(rate=0.2, n=20)
        cfg = _fast(learn_variances=True)
        state = run_em(data, cfg)
        path = save_state(state, str(tmp_path / "checkpoint.json"), cfg, extra={"note": {"value": 1}})
        document = read_document(path)
        restored = state_from_document(document)
        assert np.array_equal(restored.parameter_vector(), state.parameter_vector())
        assert restored.step == state.step
        assert restored.epoch == 2
        assert restored.noise.learnable
        assert train_config_from_document(document) == cfg
        assert document["note"] == {"value": 1}


@pytest.mark.slow
def test_recovers_structure_better_than_empty_graph():
    spec = InstanceSpec(k=5, n_per_intervention=300, missing_rate=0.0, seed=11)
    truth = gen_instance(spec)
    data = simulate(truth, spec)
    state = run_em(data, TrainConfig(epochs=60, threads=1, lambda1=1e-3))
    target, _ = extract_graph(state, 0.1)
    assert shd(target, truth.target) < shd(EdgePattern.empty(5), truth.target)

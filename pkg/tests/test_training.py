import numpy as np
import pytest

from pstatcn.data import WindowSample, synth_squat
from pstatcn.errors import ConfigurationError
from pstatcn.model import ModelSpec, build
from pstatcn.params import ParamStore
from pstatcn.tensor import Tensor
from pstatcn.training import (
    TrainConfig,
    adam_step,
    mae,
    mse_loss,
    prepare_dataset,
    rmse,
    run_experiment,
    train,
)

from reference import ref_mae, ref_rmse


def linear_samples(count, channels, T, tau, seed):
    """Noise-free task: target is a fixed linear map of the last input step."""
    rng = np.random.default_rng(seed)
    mapping = rng.normal(scale=0.5, size=(tau, channels))
    samples = []
    for i in range(count):
        window = rng.uniform(-1.0, 1.0, size=(channels, T))
        samples.append(WindowSample(input=window, target=mapping @ window[:, -1], origin=i))
    return samples


class TestMseLoss:
    def test_zero_on_equal(self):
        pred = Tensor([1.0, -2.0, 3.0])
        assert mse_loss(pred, np.array([1.0, -2.0, 3.0])).data.item() == 0.0

    def test_hand_value(self):
        loss = mse_loss(Tensor([3.0, 4.0]), np.array([0.0, 0.0]))
        assert loss.data.item() == 12.5

    def test_permutation_invariance(self):
        pred = np.array([1.0, 5.0, -2.0])
        target = np.array([0.5, 4.0, 1.0])
        perm = [2, 0, 1]
        a = mse_loss(Tensor(pred), target).data.item()
        b = mse_loss(Tensor(pred[perm]), target[perm]).data.item()
        assert a == b

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            mse_loss(Tensor([1.0, 2.0]), np.zeros(3))


class TestMetrics:
    def test_zero_on_equal(self):
        x = np.random.default_rng(0).normal(size=(4, 3))
        assert rmse(x, x) == 0.0
        assert mae(x, x) == 0.0

    def test_rmse_hand_value(self):
        assert abs(rmse(np.array([[3.0, 4.0]]), np.zeros((1, 2))) - 3.5355339059327378) < 1e-15

    def test_mae_hand_value(self):
        assert mae(np.array([[3.0, -4.0]]), np.zeros((1, 2))) == 3.5

    def test_rmse_at_least_mae(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            a = rng.normal(size=(5, 4))
            b = rng.normal(size=(5, 4))
            assert rmse(a, b) >= mae(a, b)

    def test_mae_scale_equivariance(self):
        rng = np.random.default_rng(2)
        a, b = rng.normal(size=8), rng.normal(size=8)
        for c in (-3.0, 0.5, 7.0):
            assert abs(mae(c * a, c * b) - abs(c) * mae(a, b)) < 1e-12

    @pytest.mark.parametrize("seed", range(10))
    def test_match_scalar_loop_oracle(self, seed):
        rng = np.random.default_rng(seed)
        shape = (int(rng.integers(1, 8)), int(rng.integers(1, 6)))
        a, b = rng.normal(size=shape), rng.normal(size=shape)
        assert abs(rmse(a, b) - ref_rmse(a, b)) < 1e-12
        assert abs(mae(a, b) - ref_mae(a, b)) < 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            rmse(np.zeros((2, 2)), np.zeros((2, 3)))
        with pytest.raises(ValueError):
            mae(np.zeros(2), np.zeros(3))


class TestAdam:
    def test_zero_gradient_is_fixed_point(self):
        store = ParamStore(0)
        p = store.register("w", (3,), fan_in=3)
        before = p.data.copy()
        config = TrainConfig(epochs=1)
        for t in range(1, 4):
            adam_step(store, {"w": np.zeros(3)}, config, t)
        assert np.array_equal(p.data, before)

    def test_three_step_hand_iteration(self):
        config = TrainConfig(learning_rate=0.1, epochs=1)
        store = ParamStore(0)
        p = store.register("w", (1,), fan_in=1)
        p.data[:] = 2.0
        g = 0.5

        # hand-iterated reference of the bias-corrected update
        theta, m, v = 2.0, 0.0, 0.0
        for t in range(1, 4):
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            m_hat = m / (1 - 0.9**t)
            v_hat = v / (1 - 0.999**t)
            theta -= 0.1 * m_hat / (v_hat**0.5 + 1e-8)
            adam_step(store, {"w": np.array([g])}, config, t)
            assert abs(p.data[0] - theta) < 1e-14

    def test_identical_streams_identical_trajectories(self):
        config = TrainConfig(learning_rate=0.01, epochs=1)
        stores = []
        for _ in range(2):
            store = ParamStore(5)
            store.register("w", (4,), fan_in=4)
            stores.append(store)
        rng = np.random.default_rng(0)
        for t in range(1, 6):
            g = rng.normal(size=4)
            for store in stores:
                adam_step(store, {"w": g}, config, t)
        assert stores[0]["w"].data.tobytes() == stores[1]["w"].data.tobytes()

    def test_counter_must_be_positive(self):
        store = ParamStore(0)
        store.register("w", (1,), fan_in=1)
        with pytest.raises(ValueError):
            adam_step(store, None, TrainConfig(), 0)


class TestTrainLoop:
    def test_epochs_zero_is_noop(self):
        spec = ModelSpec(variant="TCN", n=2, T=6, tau=2, k=1, N=1, H=3, seed=3)
        model = build(spec)
        before = {n: model.params[n].data.copy() for n in model.params.names()}
        report = train(model, linear_samples(10, 3, 6, 2, seed=0), TrainConfig(epochs=0))
        assert report.train_loss == [] and report.epoch_seconds == []
        for name, data in before.items():
            assert np.array_equal(model.params[name].data, data)

    def test_linear_recoverable_task_converges(self):
        spec = ModelSpec(variant="TCN", n=2, T=6, tau=2, k=1, N=1, H=8, seed=1111)
        model = build(spec)
        samples = linear_samples(256, 3, 6, 2, seed=4)
        config = TrainConfig(batch_size=32, learning_rate=0.01, epochs=200, seed=1111)
        report = train(model, samples, config)
        assert report.train_loss[-1] < 1e-3
        assert report.train_loss[-1] * 100.0 <= report.train_loss[0]

    def test_bitwise_deterministic_histories(self):
        samples = linear_samples(64, 3, 6, 2, seed=8)
        histories = []
        params = []
        for _ in range(2):
            model = build(ModelSpec(variant="PSTA_TCN", n=2, T=6, tau=2, k=2, N=1, H=3, seed=1111))
            report = train(model, samples, TrainConfig(batch_size=16, epochs=5, seed=1111))
            histories.append(np.asarray(report.train_loss).tobytes())
            params.append(b"".join(model.params[n].data.tobytes() for n in model.params.names()))
        assert histories[0] == histories[1]
        assert params[0] == params[1]

    def test_dropout_training_still_deterministic(self):
        samples = linear_samples(32, 3, 6, 2, seed=9)
        losses = []
        for _ in range(2):
            model = build(ModelSpec(variant="TCN", n=2, T=6, tau=2, k=2, N=1, H=4,
                                    dropout=0.2, seed=21))
            report = train(model, samples, TrainConfig(batch_size=8, epochs=3, seed=21))
            losses.append(report.train_loss)
        assert losses[0] == losses[1]

    def test_shape_inconsistency_rejected_before_first_step(self):
        model = build(ModelSpec(variant="TCN", n=3, T=6, tau=2, k=1, N=1, H=3))
        with pytest.raises(ConfigurationError):
            train(model, linear_samples(8, 3, 6, 2, seed=0), TrainConfig(epochs=1))

    def test_empty_samples_rejected(self):
        model = build(ModelSpec(variant="TCN", n=2, T=6, tau=2, k=1, N=1, H=3))
        with pytest.raises(ConfigurationError):
            train(model, [], TrainConfig(epochs=1))


class TestSeedIsolation:
    def test_seed_changes_init_not_sample_set(self):
        series = synth_squat(n_sensors=1, length=400, noise_std=0.02, seed=1111)
        a = prepare_dataset(series, T=8, tau=2, shuffle_seed=1)
        b = prepare_dataset(series, T=8, tau=2, shuffle_seed=2)
        assert sorted(s.origin for s in a.train_samples) == sorted(s.origin for s in b.train_samples)
        assert [s.origin for s in a.train_samples] != [s.origin for s in b.train_samples]
        assert a.test_samples[0].origin == b.test_samples[0].origin
        spec = dict(variant="TCN", n=7, T=8, tau=2, k=2, N=1, H=3)
        m1 = build(ModelSpec(seed=1, **spec))
        m2 = build(ModelSpec(seed=2, **spec))
        assert m1.params["main.head.weight"].data.tobytes() != m2.params["main.head.weight"].data.tobytes()

    def test_epoch_permutations_cover_all_samples(self):
        from pstatcn.utils import seeded_rng

        for epoch in range(4):
            order = seeded_rng(1111, "epoch_order", epoch).permutation(37)
            assert sorted(order.tolist()) == list(range(37))


class TestRunExperiment:
    def _series(self):
        return synth_squat(n_sensors=1, length=300, noise_std=0.05, seed=1111)

    def _spec(self, **over):
        base = dict(variant="TCN", n=7, T=8, tau=2, k=2, N=1, H=3, seed=1111)
        base.update(over)
        return ModelSpec(**base)

    def test_grid_of_one_equals_direct_call(self):
        series = self._series()
        config = TrainConfig(batch_size=16, epochs=2, seed=1111)
        reports = run_experiment([(self._spec(), config)], series)
        assert len(reports) == 1

        prepared = prepare_dataset(series, 8, 2, config.seed)
        model = build(self._spec())
        direct = train(model, prepared.train_samples, config, prepared.test_samples)
        assert reports[0].train_loss == direct.train_loss
        assert reports[0].test_rmse == direct.test_rmse

    def test_window_size_sweep_bookkeeping(self):
        grid = [(self._spec(T=t), TrainConfig(batch_size=16, epochs=1, seed=1111))
                for t in (4, 8, 16)]
        reports = run_experiment(grid, self._series())
        assert [r.model_spec["T"] for r in reports] == [4, 8, 16]
        assert all(r.error is None for r in reports)

    def test_ablation_grid_five_variants(self):
        grid = [(self._spec(variant=v), TrainConfig(batch_size=16, epochs=1, seed=1111))
                for v in ("PSTA_TCN", "P_TCN", "PSA_TCN", "PTA_TCN", "TCN")]
        reports = run_experiment(grid, self._series())
        assert [r.model_spec["variant"] for r in reports] == [
            "PSTA_TCN", "P_TCN", "PSA_TCN", "PTA_TCN", "TCN"]
        assert all(r.test_rmse is not None for r in reports)

    def test_cell_failure_recorded_without_aborting(self):
        grid = [
            (self._spec(T=1000), TrainConfig(batch_size=16, epochs=1, seed=1111)),
            (self._spec(), TrainConfig(batch_size=16, epochs=1, seed=1111)),
        ]
        reports = run_experiment(grid, self._series())
        assert reports[0].error is not None and "ConfigurationError" in reports[0].error
        assert reports[1].error is None and reports[1].test_rmse is not None

    def test_empty_grid_rejected(self):
        with pytest.raises(ConfigurationError):
            run_experiment([], self._series())

    def test_parallel_jobs_match_serial(self):
        grid = [(self._spec(seed=s), TrainConfig(batch_size=16, epochs=1, seed=s))
                for s in (1, 2)]
        serial = run_experiment(grid, self._series(), jobs=1)
        parallel = run_experiment(grid, self._series(), jobs=2)
        assert [r.train_loss for r in serial] == [r.train_loss for r in parallel]

    def test_attention_dump(self):
        grid = [(self._spec(variant="PSTA_TCN"), TrainConfig(batch_size=16, epochs=1, seed=1111))]
        report = run_experiment(grid, self._series(), dump_attention=True)[0]
        alpha = np.asarray(report.attention["alpha"])
        beta = np.asarray(report.attention["beta"])
        assert alpha.shape == (8, 8) and beta.shape == (8, 8)
        assert np.max(np.abs(alpha.sum(axis=0) - 1.0)) <= 1e-12
        assert np.max(np.abs(beta.sum(axis=1) - 1.0)) <= 1e-12

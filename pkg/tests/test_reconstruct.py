import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heatsense.errors import DegeneratePlacementError, DivergenceError
from heatsense.rbffd import forward_solve
from heatsense.reconstruct import (
    Dataset,
    Metrics,
    MlpConfig,
    MlpModel,
    gappy_pod_reconstruct,
    load_dataset,
    load_model,
    loss_and_grad,
    metrics,
    mlp_init,
    mlp_predict,
    mlp_train,
    pod_coefficients,
    pod_fit,
    pod_nn_reconstruct,
    physics_reconstruct,
    save_dataset,
    save_model,
)
from heatsense.system import Placement


class TestMetrics:
    def test_exact_prediction(self):
        assert metrics(np.ones(4), np.ones(4)) == Metrics(0.0, 0.0)

    def test_unit_errors(self):
        m = metrics(np.array([1.0, -1.0]), np.zeros(2))
        assert m.max_ae == 1.0 and m.mse == 1.0

    def test_single_spike(self):
        m = metrics(np.array([3.0, 0.0, 0.0]), np.zeros(3))
        assert m.max_ae == 3.0 and m.mse == pytest.approx(3.0)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            metrics(np.zeros(3), np.zeros(4))

    @given(
        st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40),
        st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40),
    )
    @settings(max_examples=100, deadline=None)
    def test_mse_bounded_by_max_ae_squared(self, a, b):
        n = min(len(a), len(b))
        m = metrics(np.array(a[:n]), np.array(b[:n]))
        assert m.mse <= m.max_ae**2 + 1e-12


class TestPod:
    def test_rank_one_snapshots(self):
        v = np.array([1.0, 2.0, -1.0, 0.5])
        data = np.outer(v, [3.0, -1.0, 2.0])
        basis = pod_fit(data, 1)
        direction = basis.modes[:, 0] * np.sign(basis.modes[0, 0])
        assert np.allclose(direction, v / np.linalg.norm(v))
        assert basis.singular_values.shape == (1,)

    def test_projection_exact_at_full_rank(self):
        rng = np.random.default_rng(0)
        data = rng.normal(size=(20, 5)) @ rng.normal(size=(5, 9))
        basis = pod_fit(data, 5)
        recon = basis.modes @ (basis.modes.T @ data)
        assert np.max(np.abs(recon - data)) < 1e-8

    def test_modes_orthonormal(self):
        rng = np.random.default_rng(1)
        basis = pod_fit(rng.normal(size=(15, 12)), 6)
        gram = basis.modes.T @ basis.modes
        assert np.max(np.abs(gram - np.eye(6))) < 1e-10
        assert np.all(np.diff(basis.singular_values) <= 0)

    def test_r_too_large(self):
        with pytest.raises(ValueError):
            pod_fit(np.ones((5, 3)), 4)

    def test_mean_removal_roundtrip(self):
        rng = np.random.default_rng(2)
        data = rng.normal(size=(10, 8)) + 5.0
        basis = pod_fit(data, 8, mean_removed=True)
        alpha = pod_coefficients(basis, data)
        recon = basis.mean[:, None] + basis.modes @ alpha
        assert np.max(np.abs(recon - data)) < 1e-8


class TestGappy:
    def _basis(self):
        rng = np.random.default_rng(3)
        data = rng.normal(size=(30, 4)) @ rng.normal(size=(4, 12))
        return pod_fit(data, 4), data

    def test_exact_recovery_in_span(self):
        basis, data = self._basis()
        truth = data[:, 2]
        p = Placement((0, 5, 11, 17, 23, 29), 30)
        field = gappy_pod_reconstruct(basis, p, truth[p.as_array()])
        assert np.max(np.abs(field - truth)) < 1e-8

    def test_zero_measurements_zero_field(self):
        basis, _ = self._basis()
        p = Placement((1, 8, 15, 22, 28), 30)
        assert np.allclose(gappy_pod_reconstruct(basis, p, np.zeros(5)), 0.0)

    def test_linear_superposition(self):
        basis, _ = self._basis()
        p = Placement((2, 9, 16, 21, 27), 30)
        rng = np.random.default_rng(4)
        s1, s2 = rng.normal(size=5), rng.normal(size=5)
        lhs = gappy_pod_reconstruct(basis, p, s1 + s2)
        rhs = gappy_pod_reconstruct(basis, p, s1) + gappy_pod_reconstruct(basis, p, s2)
        assert np.max(np.abs(lhs - rhs)) < 1e-10

    def test_too_few_sensors_degenerate(self):
        basis, _ = self._basis()
        p = Placement((3, 19), 30)
        with pytest.raises(DegeneratePlacementError):
            gappy_pod_reconstruct(basis, p, np.zeros(2))


class TestMlp:
    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        cfg = MlpConfig((3, 5, 4, 2), seed=9)
        model = mlp_init(cfg)
        X = rng.normal(size=(6, 3))
        Y = rng.normal(size=(6, 2))
        _, gws, gbs = loss_and_grad(model, X, Y)
        step = 1e-4
        params = model.weights + model.biases
        grads = gws + gbs
        worst = 0.0
        for p_arr, g_arr in zip(params, grads):
            flat_p = p_arr.ravel()
            flat_g = g_arr.ravel()
            for idx in range(0, flat_p.size, max(1, flat_p.size // 5)):
                orig = flat_p[idx]
                flat_p[idx] = orig + step
                lp = loss_and_grad(model, X, Y)[0]
                flat_p[idx] = orig - step
                lm = loss_and_grad(model, X, Y)[0]
                flat_p[idx] = orig
                fd = (lp - lm) / (2 * step)
                denom = max(abs(fd), abs(flat_g[idx]), 1e-8)
                worst = max(worst, abs(fd - flat_g[idx]) / denom)
        assert worst < 1e-5

    def test_zero_iters_returns_initialization(self):
        cfg = MlpConfig((2, 4, 3), adam_iters=0, seed=1)
        data = Dataset(np.zeros((5, 2)), np.zeros((5, 3)))
        trained = mlp_train(data, cfg)
        init = mlp_init(cfg)
        for a, b in zip(trained.weights, init.weights):
            assert np.array_equal(a, b)
        assert trained.loss_trace.size == 0

    def test_training_reproducible(self):
        rng = np.random.default_rng(6)
        data = Dataset(rng.normal(size=(10, 3)), rng.normal(size=(10, 2)))
        cfg = MlpConfig((3, 8, 2), adam_iters=50, seed=4)
        a = mlp_train(data, cfg)
        b = mlp_train(data, cfg)
        assert np.array_equal(a.loss_trace, b.loss_trace)
        for wa, wb in zip(a.weights, b.weights):
            assert np.array_equal(wa, wb)

    def test_fits_linear_map(self):
        rng = np.random.default_rng(7)
        A = rng.normal(size=(4, 6))
        X = rng.normal(size=(80, 4))
        data = Dataset(X, X @ A)
        model = mlp_train(data, MlpConfig((4, 64, 64, 6), adam_iters=4000, seed=2))
        assert model.loss_trace[-1] < 1e-4

    def test_zero_weight_model_outputs_bias(self):
        model = MlpModel((2, 3, 2), [np.zeros((2, 3)), np.zeros((3, 2))], [np.zeros(3), np.array([1.5, -2.0])])
        out = mlp_predict(model, np.array([4.0, 5.0]))
        assert np.allclose(out, [1.5, -2.0])

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_detected(self):
        data = Dataset(np.full((3, 2), 1e200), np.ones((3, 1)))
        with pytest.raises(DivergenceError):
            mlp_train(data, MlpConfig((2, 4, 1), adam_iters=5, seed=0))

    def test_layer_shape_mismatch(self):
        data = Dataset(np.zeros((4, 3)), np.zeros((4, 2)))
        with pytest.raises(ValueError):
            mlp_train(data, MlpConfig((5, 4, 2), adam_iters=1))


class TestPodNn:
    def test_zero_model_gives_mean_plus_bias_combination(self):
        rng = np.random.default_rng(8)
        basis = pod_fit(rng.normal(size=(12, 6)), 3)
        model = MlpModel(
            (4, 3),
            [np.zeros((4, 3))],
            [np.array([1.0, 0.0, 0.0])],
        )
        field = pod_nn_reconstruct(model, basis, np.zeros(4))
        assert np.allclose(field, basis.modes[:, 0])


class TestPhysicsReconstruct:
    def test_noiseless_recovery(self, heat1d_small):
        _, _, op = heat1d_small
        lam = np.array([0.49, 2.25])
        truth = forward_solve(op, lam)
        p = Placement((5, 14, 23, 32, 41, 50, 58, 30, 20, 47), 60)
        field, lam_hat = physics_reconstruct(op, p, truth[p.as_array()], gamma=1.0)
        assert metrics(field, truth).max_ae < 1e-4
        assert np.max(np.abs(lam_hat - lam)) < 1e-6

    def test_noise_monotonicity_smoke(self, heat1d_small):
        # noiseless error at least 10x smaller than sigma=0.5 error
        _, _, op = heat1d_small
        lam = np.array([4.0, 9.0])
        truth = forward_solve(op, lam)
        p = Placement((3, 11, 22, 31, 44, 52, 57, 26, 16, 38), 60)
        sensors = p.as_array()
        clean = metrics(physics_reconstruct(op, p, truth[sensors])[0], truth).mse
        noisy = []
        for seed in range(10):
            rng = np.random.default_rng(100 + seed)
            meas = truth[sensors] * (1.0 + rng.normal(0, 0.5, size=p.k))
            noisy.append(metrics(physics_reconstruct(op, p, meas)[0], truth).mse)
        assert clean * 10 < np.mean(noisy)


class TestPersistence:
    def test_model_roundtrip(self, tmp_path):
        rng = np.random.default_rng(9)
        data = Dataset(rng.normal(size=(8, 3)), rng.normal(size=(8, 2)))
        model = mlp_train(data, MlpConfig((3, 6, 2), adam_iters=20, seed=3))
        path = tmp_path / "model.npz"
        save_model(model, path)
        back = load_model(path)
        x = rng.normal(size=(4, 3))
        assert np.array_equal(mlp_predict(back, x), mlp_predict(model, x))

    def test_dataset_roundtrip(self, tmp_path):
        rng = np.random.default_rng(10)
        data = Dataset(rng.normal(size=(7, 4)), rng.normal(size=(7, 5)), split="test")
        path = tmp_path / "data.csv"
        save_dataset(data, path)
        back = load_dataset(path, split="test")
        assert np.allclose(back.inputs, data.inputs)
        assert np.allclose(back.targets, data.targets)
        assert back.split == "test"

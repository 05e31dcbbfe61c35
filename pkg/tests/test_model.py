import numpy as np
import pytest

from nscsl import model


def finite_difference_grads(client, server, x, y, h=1e-5):
    """Central differences over every parameter entry."""
    fd = {}
    for params in (client, server):
        for name, arr in vars(params).items():
            g = np.zeros_like(arr)
            flat = arr.ravel()
            gflat = g.ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                up = model.full_loss(client, server, x, y)
                flat[i] = orig - h
                down = model.full_loss(client, server, x, y)
                flat[i] = orig
                gflat[i] = (up - down) / (2 * h)
            fd[name] = g
    return fd


def analytic_grads(client, server, x, y):
    activations = model.client_forward(client, x)
    _, server_grads, d_act = model.server_loss_and_grads(server, activations, y)
    client_grads = model.client_backward(client, x, activations, d_act)
    return {**vars(client_grads), **vars(server_grads)}


class TestGradients:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        client, server = model.init_params(d_in=5, hidden=4, hidden2=3, classes=3, seed=seed)
        x = rng.standard_normal((6, 5))
        y = rng.integers(0, 3, size=6)
        fd = finite_difference_grads(client, server, x, y)
        analytic = analytic_grads(client, server, x, y)
        for name, g in analytic.items():
            denom = np.maximum(np.abs(fd[name]), 1e-6)
            rel = np.max(np.abs(g - fd[name]) / denom)
            assert rel < 1e-4, f"block {name}: max rel error {rel}"

    def test_loss_decreases_under_sgd(self):
        client, server = model.init_params(d_in=8, hidden=6, hidden2=5, classes=3, seed=3)
        task = model.make_synthetic_task(7, n_clients=1, samples_per_client=120, d_in=8, classes=3)
        x, y = task.shards[0]
        first = model.full_loss(client, server, x, y)
        for _ in range(60):
            a = model.client_forward(client, x)
            _, sg, d_act = model.server_loss_and_grads(server, a, y)
            cg = model.client_backward(client, x, a, d_act)
            model.sgd_step(client, cg, 0.1)
            model.sgd_step(server, sg, 0.1)
        assert model.full_loss(client, server, x, y) < 0.5 * first


class TestSyntheticTask:
    def test_deterministic(self):
        a = model.make_synthetic_task(5, n_clients=3, samples_per_client=50, d_in=6, classes=3)
        b = model.make_synthetic_task(5, n_clients=3, samples_per_client=50, d_in=6, classes=3)
        for (xa, ya), (xb, yb) in zip(a.shards, b.shards):
            np.testing.assert_array_equal(xa, xb)
            np.testing.assert_array_equal(ya, yb)
        np.testing.assert_array_equal(a.eval_x, b.eval_x)

    def test_shards_are_iid_balanced(self):
        task = model.make_synthetic_task(6, n_clients=4, samples_per_client=120, d_in=5, classes=4)
        global_hist = np.bincount(np.concatenate([y for _, y in task.shards]), minlength=4)
        global_frac = global_hist / global_hist.sum()
        for _, y in task.shards:
            hist = np.bincount(y, minlength=4) / y.size
            assert np.all(np.abs(hist - global_frac) / global_frac < 0.10)

    def test_clients_get_distinct_samples(self):
        task = model.make_synthetic_task(8, n_clients=2, samples_per_client=30, d_in=5, classes=2)
        assert not np.array_equal(task.shards[0][0], task.shards[1][0])

    def test_separation_controls_difficulty(self):
        near = model.make_synthetic_task(9, 1, 400, d_in=10, classes=3, separation=0.5)
        far = model.make_synthetic_task(9, 1, 400, d_in=10, classes=3, separation=6.0)

        def nearest_center_accuracy(task):
            x, y = task.shards[0]
            centers = np.stack([x[y == c].mean(axis=0) for c in range(3)])
            d = ((x[:, None, :] - centers[None]) ** 2).sum(axis=2)
            return float(np.mean(d.argmin(axis=1) == y))

        assert nearest_center_accuracy(far) > nearest_center_accuracy(near) + 0.2

    def test_needs_two_classes(self):
        with pytest.raises(ValueError, match="classes"):
            model.make_synthetic_task(0, 1, 10, d_in=4, classes=1)


def test_init_params_deterministic_and_scaled():
    c1, s1 = model.init_params(10, 8, 6, 4, seed=11)
    c2, s2 = model.init_params(10, 8, 6, 4, seed=11)
    np.testing.assert_array_equal(c1.w1, c2.w1)
    np.testing.assert_array_equal(s1.w3, s2.w3)
    assert c1.w1.std() == pytest.approx(1 / np.sqrt(10), rel=0.3)
    assert np.all(c1.b1 == 0)

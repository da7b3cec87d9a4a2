import math

import numpy as np
import pytest

from helios import bnn
from helios.bnn import BnnConfig, TrainingBatch
from helios.metrics import score


def line_batch(n=100):
    x = np.linspace(0.0, 1.0, n)
    return TrainingBatch(np.column_stack([x, np.zeros(n)]), 2.0 * x)


@pytest.fixture(scope="module")
def line_model():
    batch = line_batch()
    return bnn.train(bnn.init_model(BnnConfig(epochs=500), batch), batch)


def identity_model():
    """Hand-built network with output equal to its first input (relu(x) - relu(-x))."""
    m = bnn.init_model(BnnConfig(hidden_sizes=(2, 2)))
    m.weights = [np.array([[1.0, -1.0], [0.0, 0.0]]), np.eye(2)]
    m.biases = [np.zeros(2), np.zeros(2)]
    m.mu = np.array([1.0, -1.0, 0.0])
    m.rho = np.full(3, -60.0)
    return m


def test_init_deterministic_and_shapes():
    a, b = bnn.init_model(BnnConfig(seed=3)), bnn.init_model(BnnConfig(seed=3))
    for k, v in a.param_arrays().items():
        np.testing.assert_array_equal(v, b.param_arrays()[k])
    assert a.mu.size == 101 and a.rho.size == 101
    assert np.all((a.sigma >= 0.01) & (a.sigma <= 0.1))
    assert not np.array_equal(a.weights[0], bnn.init_model(BnnConfig(seed=4)).weights[0])


def test_degenerate_posterior_is_deterministic():
    m = bnn.init_model(BnnConfig(seed=1))
    m.rho[:] = -60.0
    x = np.array([0.3, -0.2])
    a = bnn.forward_sample(m, x, np.random.default_rng(1))
    b = bnn.forward_sample(m, x, np.random.default_rng(2))
    assert a == b
    assert bnn.predict_mean(m, 0.3, 0.0, n_draws=7, rng=np.random.default_rng(5)) == pytest.approx(
        max(bnn.forward_sample(m, m.normalize(0.3, 0.0)[0], np.random.default_rng(9)), 0.0), rel=1e-12)


def test_fixed_stream_reproducible():
    m = bnn.init_model(BnnConfig(seed=1))
    xs = np.random.default_rng(0).normal(size=(5, 2))
    np.testing.assert_array_equal(bnn.forward_sample(m, xs, np.random.default_rng(8)),
                                  bnn.forward_sample(m, xs, np.random.default_rng(8)))


def test_zero_mean_weights_give_zero_mean_output():
    m = bnn.init_model(BnnConfig(seed=2, init_sigma=0.5))
    m.mu[:] = 0.0
    rng = np.random.default_rng(3)
    draws = np.array([bnn.forward_sample(m, np.array([0.7, 0.1]), rng) for _ in range(10_000)])
    se = draws.std(ddof=1) / math.sqrt(draws.size)
    assert abs(draws.mean()) < 3 * se


def test_reparameterization_statistics():
    m = bnn.init_model(BnnConfig(seed=2, init_sigma=0.2))
    m.mu[:] = np.linspace(-1, 1, m.mu.size)
    rng = np.random.default_rng(4)
    n = 100_000
    for j in (0, 50, 100):  # one weight at a time; 3 SE is a per-quantity bound
        w = m.mu[j] + m.sigma[j] * rng.standard_normal(n)
        assert abs(w.mean() - m.mu[j]) < 3 * m.sigma[j] / math.sqrt(n)
        assert abs(w.std(ddof=1) - m.sigma[j]) < 3 * m.sigma[j] / math.sqrt(2 * (n - 1))


def _kl_term(m, xn, yn, xi):
    return bnn.loss_and_grads(m, xn, yn, xi, 1.0)[0] - bnn.loss_and_grads(m, xn, yn, xi, 0.0)[0]


def test_kl_term_vanishes_in_expectation_when_posterior_equals_prior():
    cfg = BnnConfig(hidden_sizes=(4,), prior_std=0.7, seed=5)
    m = bnn.init_model(cfg)
    m.mu[:] = 0.0
    m.rho[:] = bnn._inv_softplus(0.7)
    xn, yn = np.zeros((1, 2)), np.zeros(1)
    rng = np.random.default_rng(6)
    terms = np.array([_kl_term(m, xn, yn, rng.standard_normal((1, m.mu.size))) for _ in range(10_000)])
    se = terms.std(ddof=1) / math.sqrt(terms.size)
    assert abs(terms.mean()) < 3 * se


def test_collapsed_posterior_on_exact_fit():
    """With sigma tiny and a perfectly fitted point the data term is the Gaussian constant."""
    m = bnn.init_model(BnnConfig(hidden_sizes=(3,), seed=1))
    m.mu[:] = 0.0
    m.rho[:] = -40.0
    xn, yn = np.array([[0.2, 0.4]]), np.zeros(1)
    xi = np.random.default_rng(0).standard_normal((1, m.mu.size))
    sigma_obs = m.config.obs_noise_std
    data_term = bnn.loss_and_grads(m, xn, yn, xi, 0.0)[0]
    assert data_term == pytest.approx(math.log(sigma_obs) + 0.5 * math.log(2 * math.pi), abs=1e-12)
    w = m.mu + m.sigma * xi[0]
    analytic = np.sum(-np.log(m.sigma) - 0.5 * xi[0] ** 2 + 0.5 * w**2 / m.config.prior_std**2 + math.log(m.config.prior_std))
    assert _kl_term(m, xn, yn, xi) == pytest.approx(analytic, rel=1e-12)


def test_doubling_data_doubles_only_the_likelihood():
    m = bnn.init_model(BnnConfig(hidden_sizes=(8, 8), seed=2))
    rng = np.random.default_rng(1)
    xn, yn = rng.normal(size=(6, 2)), rng.normal(size=6)
    xi = rng.standard_normal((2, m.mu.size))
    x2, y2 = np.vstack([xn, xn]), np.concatenate([yn, yn])
    d1, d2 = bnn.loss_and_grads(m, xn, yn, xi, 0.0)[0], bnn.loss_and_grads(m, x2, y2, xi, 0.0)[0]
    assert d2 == pytest.approx(2 * d1, rel=1e-12)
    assert _kl_term(m, x2, y2, xi) == pytest.approx(_kl_term(m, xn, yn, xi), rel=1e-9)


def kink_margin(model, xn):
    """Smallest |pre-activation| over all hidden units and inputs."""
    acts = bnn._hidden(model, xn)
    return min(float(np.min(np.abs(acts[n] @ w + b))) for n, (w, b) in enumerate(zip(model.weights, model.biases)))


def smooth_batch(model, seed, n=5, margin=1e-3):
    """A normalized batch where no ReLU unit sits within ``margin`` of its kink.

    Central differences across a kink measure a one-sided slope, so the
    comparison is only meaningful where the loss is differentiable.
    """
    rng = np.random.default_rng(seed)
    while True:
        xn = rng.normal(size=(n, 2))
        if kink_margin(model, xn) > margin:
            return xn, rng.normal(size=n)


def gradient_check(model, xn, yn, xi, h=1e-5):
    """Worst elementwise relative error between analytic and central-difference gradients."""
    _, grads = bnn.loss_and_grads(model, xn, yn, xi)
    worst = 0.0
    for name, arr in model.param_arrays().items():
        flat = arr.reshape(-1)
        for j in range(flat.size):
            keep = flat[j]
            flat[j] = keep + h
            up = bnn.loss_and_grads(model, xn, yn, xi)[0]
            flat[j] = keep - h
            down = bnn.loss_and_grads(model, xn, yn, xi)[0]
            flat[j] = keep
            num = (up - down) / (2 * h)
            ana = grads[name].reshape(-1)[j]
            scale = max(abs(num), abs(ana))
            if scale > 1e-6:  # below this both are finite-difference noise
                worst = max(worst, abs(num - ana) / scale)
    return worst


def test_gradient_check_small_network():
    m = bnn.init_model(BnnConfig(hidden_sizes=(6, 5), seed=4))
    rng = np.random.default_rng(2)
    m.mu[:] = rng.normal(size=m.mu.size)
    xn, yn = smooth_batch(m, 2)
    xi = rng.standard_normal((1, m.mu.size))
    assert gradient_check(m, xn, yn, xi) < 1e-4


def test_line_regression(line_model):
    grid = np.linspace(0.005, 0.995, 50)
    pred = bnn.predict_mean(line_model, grid, np.zeros(50), rng=np.random.default_rng(0))
    assert score(2 * grid, pred).r_squared > 0.99


def test_loss_history_finite_and_improves(line_model):
    h = np.array(line_model.loss_history)
    assert h.size == 500 and np.all(np.isfinite(h))
    assert np.median(h[-50:]) < np.median(h[:50])


def test_zero_epochs_is_identity():
    batch = line_batch()
    m = bnn.init_model(BnnConfig(epochs=0), batch)
    out = bnn.train(m, batch)
    for k, v in m.param_arrays().items():
        np.testing.assert_array_equal(v, out.param_arrays()[k])
    assert out.loss_history == []


def test_training_deterministic_and_non_mutating():
    batch = line_batch(40)
    m = bnn.init_model(BnnConfig(epochs=20, hidden_sizes=(16, 16), seed=9), batch)
    before = {k: v.copy() for k, v in m.param_arrays().items()}
    a, b = bnn.train(m, batch), bnn.train(m, batch)
    for k in before:
        np.testing.assert_array_equal(a.param_arrays()[k], b.param_arrays()[k])
        np.testing.assert_array_equal(m.param_arrays()[k], before[k])


def test_divergence_guard():
    batch = line_batch(10)
    m = bnn.init_model(BnnConfig(epochs=5, hidden_sizes=(4,)), batch)
    m.rho[:] = 1e6  # softplus overflows the log-likelihood to inf
    m.mu[:] = 1e200
    with np.errstate(over="ignore", invalid="ignore"), pytest.raises(bnn.TrainingDiverged):
        bnn.train(m, batch)


def test_predict_mean_contract():
    assert BnnConfig().mc_samples_predict == 10
    m = bnn.init_model(BnnConfig(seed=0))
    m.y_mean = -100.0  # drives raw outputs negative
    out = bnn.predict_mean(m, np.linspace(0, 1, 20), np.arange(20), rng=np.random.default_rng(0))
    assert np.all(out >= 0)
    with pytest.raises(ValueError):
        bnn.predict_mean(m, 0.0, 0.0, n_draws=0)


def test_identity_rollout_is_constant():
    m = identity_model()
    np.testing.assert_allclose(bnn.predict_horizon(m, 3, 42.0, 10, np.random.default_rng(0)), 42.0)
    assert bnn.predict_horizon(m, 9, 1.0, 10).size == 1
    with pytest.raises(ValueError):
        bnn.predict_horizon(m, 0, 1.0, 10)


def test_predictor_adapter_reproducible():
    m = bnn.init_model(BnnConfig(seed=0))
    obs = np.array([0.0, 10.0, 20.0])
    a = bnn.BnnPredictor(m, seed=5).predict_horizon(obs, 8)
    b = bnn.BnnPredictor(m, seed=5).predict_horizon(obs, 8)
    np.testing.assert_array_equal(a, b)
    assert a.size == 5


def test_payload_round_trip(line_model):
    back = bnn.BnnModel.from_payload(line_model.to_payload())
    for k, v in line_model.param_arrays().items():
        np.testing.assert_array_equal(back.param_arrays()[k], v)
    assert back.config == line_model.config


def test_make_batch_pairs_consecutive_steps():
    from conftest import flat_day

    day = flat_day(3.0, T=5)
    batch = bnn.make_batch([day, day])
    assert batch.inputs.shape == (8, 2)
    assert batch.inputs[:4, 1].tolist() == [1.0, 2.0, 3.0, 4.0]

"""Bayes-by-backprop network for one-step sunlight prediction.

Architecture: ``(s_t, t) -> Dense+ReLU -> Dense+ReLU -> variational Dense -> s_{t+1}``.
Only the output layer is Bayesian; its weights (and bias) follow a factorized
Gaussian ``q(w) = N(mu, softplus(rho)^2)`` sampled with the reparameterization
``w = mu + softplus(rho) * xi``. Training minimizes the Monte-Carlo
variational free energy

    F = 1/N sum_j [ log q(w_j) - log p(w_j) - log p(D | w_j) ]

with a Gaussian prior ``N(0, prior_std^2)`` and a Gaussian likelihood of fixed
width ``obs_noise_std`` (normalized units). Everything is plain numpy; the
gradients are analytic and checked against finite differences in the tests.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from helios.data import StepSeries

log = logging.getLogger(__name__)

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class BnnConfig:
    hidden_sizes: tuple = (100, 100)
    mc_samples_train: int = 1
    mc_samples_predict: int = 10
    learning_rate: float = 1e-4
    epochs: int = 2000
    batch_size: int = 32
    prior_std: float = 1.0
    obs_noise_std: float = 0.05
    init_sigma: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        counts = (self.mc_samples_train, self.mc_samples_predict, self.batch_size, *self.hidden_sizes)
        if any(c < 1 for c in counts) or not self.hidden_sizes:
            raise ValueError("layer sizes, sample counts and batch size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        for name in ("learning_rate", "prior_std", "obs_noise_std", "init_sigma"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")

    @classmethod
    def from_dict(cls, d: dict) -> "BnnConfig":
        return cls(**{k: (tuple(v) if k == "hidden_sizes" else v) for k, v in d.items()})


@dataclass(frozen=True)
class TrainingBatch:
    """Raw (un-normalized) supervised pairs ``(s_t, t) -> s_{t+1}``."""

    inputs: np.ndarray  # (n, 2): PPFD at step t, step index t
    targets: np.ndarray  # (n,)

    def __post_init__(self):
        if self.inputs.ndim != 2 or self.inputs.shape[1] != 2 or self.targets.shape != (self.inputs.shape[0],):
            raise ValueError("inputs must be (n, 2) and targets (n,)")
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.targets))):
            raise ValueError("training data must be finite")

    def __len__(self):
        return self.targets.size


def make_batch(days: Sequence[StepSeries]) -> TrainingBatch:
    """All consecutive-step pairs of the given days, night steps included."""
    xs, ys = [], []
    for day in days:
        s = np.asarray(day.sun_ppfd, dtype=float)
        t = np.arange(1, s.size, dtype=float)
        xs.append(np.column_stack([s[:-1], t]))
        ys.append(s[1:])
    if not xs:
        raise ValueError("no training days")
    return TrainingBatch(np.vstack(xs), np.concatenate(ys))


def softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _inv_softplus(y: float) -> float:
    return float(np.log(np.expm1(y)))


@dataclass
class BnnModel:
    """Parameters plus the normalization statistics they were fitted under.

    ``mu``/``rho`` have one entry per hidden unit of the last layer plus a
    trailing bias entry.
    """

    config: BnnConfig
    weights: list
    biases: list
    mu: np.ndarray
    rho: np.ndarray
    x_mean: np.ndarray = field(default_factory=lambda: np.zeros(2))
    x_std: np.ndarray = field(default_factory=lambda: np.ones(2))
    y_mean: float = 0.0
    y_std: float = 1.0
    loss_history: list = field(default_factory=list)

    @property
    def sigma(self) -> np.ndarray:
        return softplus(self.rho)

    def param_arrays(self) -> dict:
        d = {}
        for n, (w, b) in enumerate(zip(self.weights, self.biases)):
            d[f"W{n}"], d[f"b{n}"] = w, b
        d["mu"], d["rho"] = self.mu, self.rho
        return d

    def copy(self) -> "BnnModel":
        return replace(
            self,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            mu=self.mu.copy(),
            rho=self.rho.copy(),
            x_mean=self.x_mean.copy(),
            x_std=self.x_std.copy(),
            loss_history=list(self.loss_history),
        )

    def normalize(self, s, t) -> np.ndarray:
        x = np.column_stack([np.atleast_1d(np.asarray(s, float)), np.atleast_1d(np.asarray(t, float))])
        return (x - self.x_mean) / self.x_std

    def to_payload(self) -> dict:
        cfg = asdict(self.config)
        cfg["hidden_sizes"] = list(cfg["hidden_sizes"])
        return {
            "config": cfg,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "mu": self.mu.tolist(),
            "rho": self.rho.tolist(),
            "x_mean": self.x_mean.tolist(),
            "x_std": self.x_std.tolist(),
            "y_mean": self.y_mean,
            "y_std": self.y_std,
            "loss_history": list(self.loss_history),
        }

    @classmethod
    def from_payload(cls, d: dict) -> "BnnModel":
        arr = lambda v: np.array(v, dtype=float)  # noqa: E731
        return cls(
            config=BnnConfig.from_dict(d["config"]),
            weights=[arr(w) for w in d["weights"]],
            biases=[arr(b) for b in d["biases"]],
            mu=arr(d["mu"]),
            rho=arr(d["rho"]),
            x_mean=arr(d["x_mean"]),
            x_std=arr(d["x_std"]),
            y_mean=float(d["y_mean"]),
            y_std=float(d["y_std"]),
            loss_history=[float(v) for v in d["loss_history"]],
        )


def init_model(config: BnnConfig = BnnConfig(), batch: TrainingBatch | None = None) -> BnnModel:
    """Fresh parameters: He-uniform dense layers, small output means, sigma = init_sigma.

    With a ``batch`` the normalization statistics are taken from it.
    """
    rng = np.random.default_rng(config.seed)
    weights, biases = [], []
    fan_in = 2
    for width in config.hidden_sizes:
        limit = math.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, width)))
        biases.append(np.zeros(width))
        fan_in = width
    mu = np.concatenate([rng.normal(0.0, 1.0 / math.sqrt(fan_in), size=fan_in), [0.0]])
    rho = np.full(fan_in + 1, _inv_softplus(config.init_sigma))
    model = BnnModel(config, weights, biases, mu, rho)
    if batch is not None:
        set_normalization(model, batch)
    return model


def set_normalization(model: BnnModel, batch: TrainingBatch) -> None:
    x_std = batch.inputs.std(axis=0)
    y_std = float(batch.targets.std())
    model.x_mean = batch.inputs.mean(axis=0)
    model.x_std = np.where(x_std > 0, x_std, 1.0)
    model.y_mean = float(batch.targets.mean())
    model.y_std = y_std if y_std > 0 else 1.0


def _hidden(model: BnnModel, xn: np.ndarray) -> list:
    acts = [xn]
    for w, b in zip(model.weights, model.biases):
        acts.append(np.maximum(acts[-1] @ w + b, 0.0))
    return acts


def forward_sample(model: BnnModel, x_norm, rng: np.random.Generator) -> np.ndarray | float:
    """One draw of the output weights applied to normalized inputs; denormalized result."""
    xn = np.atleast_2d(np.asarray(x_norm, dtype=float))
    h = _hidden(model, xn)[-1]
    w = model.mu + model.sigma * rng.standard_normal(model.mu.size)
    out = (h @ w[:-1] + w[-1]) * model.y_std + model.y_mean
    return float(out[0]) if np.ndim(x_norm) == 1 else out


def loss_and_grads(model: BnnModel, xn: np.ndarray, yn: np.ndarray, xi: np.ndarray, kl_scale: float = 1.0):
    """Free-energy estimate on a normalized batch for fixed noise draws ``xi`` (n_samples, H+1).

    Returns ``(loss, grads)`` with ``grads`` keyed like :meth:`BnnModel.param_arrays`.
    """
    cfg = model.config
    xi = np.atleast_2d(xi)
    n_samples = xi.shape[0]
    acts = _hidden(model, xn)
    h = acts[-1]
    sigma = model.sigma
    dsigma = _sigmoid(model.rho)
    var_obs = cfg.obs_noise_std**2
    var_prior = cfg.prior_std**2

    loss = 0.0
    g_mu = np.zeros_like(model.mu)
    g_rho = np.zeros_like(model.rho)
    g_h = np.zeros_like(h)
    for xi_j in xi:
        w = model.mu + sigma * xi_j
        f = h @ w[:-1] + w[-1]
        resid = yn - f
        log_q = np.sum(-np.log(sigma) - 0.5 * xi_j**2 - HALF_LOG_2PI)
        log_p = np.sum(-0.5 * w**2 / var_prior - math.log(cfg.prior_std) - HALF_LOG_2PI)
        nll = np.sum(0.5 * resid**2 / var_obs + math.log(cfg.obs_noise_std) + HALF_LOG_2PI)
        loss += kl_scale * (log_q - log_p) + nll

        g_f = -resid / var_obs
        g_w = np.concatenate([h.T @ g_f, [g_f.sum()]])
        g_w += kl_scale * w / var_prior  # from -log p
        g_mu += g_w
        g_rho += g_w * xi_j * dsigma - kl_scale * dsigma / sigma  # log q depends on rho only
        g_h += np.outer(g_f, w[:-1])

    grads = {"mu": g_mu / n_samples, "rho": g_rho / n_samples}
    delta = g_h / n_samples
    for n in range(len(model.weights) - 1, -1, -1):
        delta = delta * (acts[n + 1] > 0)
        grads[f"W{n}"] = acts[n].T @ delta
        grads[f"b{n}"] = delta.sum(axis=0)
        if n:
            delta = delta @ model.weights[n].T
    return loss / n_samples, grads


def elbo_loss(model: BnnModel, batch: TrainingBatch, n_samples: int = 1, rng=None, kl_scale: float = 1.0) -> float:
    """Monte-Carlo free energy of a raw batch under the model's normalization."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng() if rng is None else rng
    xn = model.normalize(batch.inputs[:, 0], batch.inputs[:, 1])
    yn = (batch.targets - model.y_mean) / model.y_std
    xi = rng.standard_normal((n_samples, model.mu.size))
    return loss_and_grads(model, xn, yn, xi, kl_scale)[0]


def _flatten_params(model: BnnModel):
    """Move all parameters into one buffer and rebind the model's arrays as views of it."""
    arrays = model.param_arrays()
    flat = np.concatenate([a.ravel() for a in arrays.values()])
    views, offset = {}, 0
    for k, a in arrays.items():
        views[k] = flat[offset:offset + a.size].reshape(a.shape)
        offset += a.size
    n_layers = len(model.weights)
    model.weights = [views[f"W{n}"] for n in range(n_layers)]
    model.biases = [views[f"b{n}"] for n in range(n_layers)]
    model.mu, model.rho = views["mu"], views["rho"]
    return flat, views


def train(model: BnnModel, batch: TrainingBatch | Sequence[StepSeries], config: BnnConfig | None = None) -> BnnModel:
    """Adam on the free energy; returns a trained copy and leaves ``model`` untouched.

    The prior/posterior terms are spread over the minibatches of an epoch.
    The recorded loss per epoch is the sum of its minibatch losses.
    """
    cfg = model.config if config is None else config
    if not isinstance(batch, TrainingBatch):
        batch = make_batch(batch)
    if len(batch) == 0:
        raise ValueError("empty training set")
    out = model.copy()
    out.config = cfg
    if cfg.epochs == 0:
        return out

    rng = np.random.default_rng([cfg.seed, 1])
    xn = out.normalize(batch.inputs[:, 0], batch.inputs[:, 1])
    yn = (batch.targets - out.y_mean) / out.y_std
    n = yn.size
    n_batches = math.ceil(n / cfg.batch_size)
    kl_scale = 1.0 / n_batches

    flat, views = _flatten_params(out)
    m1 = np.zeros_like(flat)
    m2 = np.zeros_like(flat)
    step = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            xi = rng.standard_normal((cfg.mc_samples_train, out.mu.size))
            loss, grads = loss_and_grads(out, xn[idx], yn[idx], xi, kl_scale)
            if not math.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}, step {step}")
            total += loss
            step += 1
            g = np.concatenate([grads[k].ravel() for k in views])
            m1 *= cfg.beta1
            m1 += (1.0 - cfg.beta1) * g
            m2 *= cfg.beta2
            m2 += (1.0 - cfg.beta2) * g * g
            lr_t = cfg.learning_rate * math.sqrt(1.0 - cfg.beta2**step) / (1.0 - cfg.beta1**step)
            flat -= lr_t * m1 / (np.sqrt(m2) + cfg.adam_eps * math.sqrt(1.0 - cfg.beta2**step))
        out.loss_history.append(total)
        if epoch % 100 == 0:
            log.debug("epoch %d loss %.4f", epoch, total)
    return out


def predict_mean(model: BnnModel, s, t, n_draws: int | None = None, rng=None) -> np.ndarray | float:
    """Average of ``n_draws`` sampled networks at raw inputs ``(s, t)``, clamped at 0."""
    n_draws = model.config.mc_samples_predict if n_draws is None else n_draws
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    rng = np.random.default_rng() if rng is None else rng
    h = _hidden(model, model.normalize(s, t))[-1]
    w = model.mu + model.sigma * rng.standard_normal((n_draws, model.mu.size))
    out = (h @ w[:, :-1].T + w[:, -1]).mean(axis=1) * model.y_std + model.y_mean
    out = np.maximum(out, 0.0)
    return float(out[0]) if np.ndim(s) == 0 else out


def predict_horizon(model: BnnModel, i: int, s_i: float, T: int, rng=None, n_draws: int | None = None) -> np.ndarray:
    """Autoregressive rollout: predicted PPFD for steps ``i+1..T`` from ``s_i`` observed at step ``i``."""
    if not 1 <= i <= T:
        raise ValueError(f"step i must be in 1..{T}, got {i}")
    rng = np.random.default_rng() if rng is None else rng
    out = np.empty(T - i)
    s = float(s_i)
    for n, t in enumerate(range(i, T)):
        s = predict_mean(model, s, t, n_draws, rng)
        out[n] = s
    return out


class BnnPredictor:
    """Adapter exposing a trained model through ``predict_horizon(observed, T)``.

    Holds its own random stream so predictions are reproducible per seed.
    """

    def __init__(self, model: BnnModel, seed=0, n_draws: int | None = None):
        self.model = model
        self.n_draws = n_draws
        self.rng = np.random.default_rng(seed)

    def predict_horizon(self, observed, T):
        obs = np.asarray(observed, dtype=float)
        return predict_horizon(self.model, obs.size, float(obs[-1]), T, self.rng, self.n_draws)

"""Gradient-ascent drivers: per-query score-table optimization and
feature-based scorer training through the sample-based gradients."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .core import AttractTable, Placement, RankingConfig, ScoreTable, VarRanking
from .exposure import ExposureTable
from .gradients import vlpl1_gradient, vlpl2_gradient
from .seeding import derive_seed

ESTIMATORS = {"vlpl1": vlpl1_gradient, "vlpl2": vlpl2_gradient}

CHECKPOINT_FORMAT = "varlenrank-scorer"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class AdamParams:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0


@dataclass
class AdamState:
    """Step counter and per-parameter moment accumulators."""

    hyper: AdamParams
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params: list[np.ndarray], hyper: AdamParams) -> "AdamState":
        return cls(
            hyper=hyper,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )

    def ascend(self, params: list[np.ndarray], grads: list[np.ndarray]) -> list[np.ndarray]:
        """One Adam step in the direction of ``grads`` (ascent). L2 weight
        decay is applied as a penalty gradient."""
        h = self.hyper
        self.step += 1
        t = self.step
        out = []
        for i, (p, g) in enumerate(zip(params, grads)):
            if h.weight_decay:
                g = g - h.weight_decay * p
            self.m[i] = h.beta1 * self.m[i] + (1 - h.beta1) * g
            self.v[i] = h.beta2 * self.v[i] + (1 - h.beta2) * g * g
            m_hat = self.m[i] / (1 - h.beta1**t)
            v_hat = self.v[i] / (1 - h.beta2**t)
            out.append(p + h.lr * m_hat / (np.sqrt(v_hat) + h.eps))
        return out

    def descend(self, params, grads):
        return self.ascend(params, [-g for g in grads])


def greedy_decode(scores: ScoreTable, config: RankingConfig) -> VarRanking:
    """Deterministic collapse of a score table: repeatedly place the
    eligible pair with the highest score (first index wins ties)."""
    D, L, K = config.num_docs, config.max_len, config.slots
    vals = scores.values
    placed = np.zeros(D, dtype=bool)
    used = 0
    items: list[Placement] = []
    while True:
        mask = ~placed[:, None] & (
            used + np.arange(1, L + 1)[None, :] <= K
        )
        if not mask.any():
            break
        masked = np.where(mask, vals, -np.inf)
        d, l_idx = np.unravel_index(int(np.argmax(masked)), masked.shape)
        items.append(Placement(int(d), int(l_idx) + 1))
        placed[d] = True
        used += int(l_idx) + 1
    return VarRanking(tuple(items))


def postprocess_optimize(
    attract_hat: AttractTable,
    exposure: ExposureTable,
    config: RankingConfig,
    hyper: AdamParams | None = None,
    estimator: str = "vlpl2",
    steps: int = 500,
    n_samples: int = 1000,
    seed=0,
) -> tuple[ScoreTable, VarRanking]:
    """Ascend a per-query score look-up table from zero initialization and
    return it with its greedy decode."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    est_fn = ESTIMATORS[estimator]
    hyper = hyper or AdamParams(lr=0.01)
    table = np.zeros((config.num_docs, config.max_len))
    state = AdamState.for_params([table], hyper)
    for step in range(steps):
        grad = est_fn(
            ScoreTable(table), attract_hat, exposure, config,
            n_samples, seed=derive_seed(seed, step),
        ).grads
        (table,) = state.ascend([table], [grad])
    final = ScoreTable(table)
    return final, greedy_decode(final, config)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class Scorer:
    """Feedforward scorer: feature vector -> one score per length.

    Hidden layers (0 to 5 of them) use sigmoid activations; the output
    head is linear with one unit per length. Dropout is applied to hidden
    activations only when a dropout RNG is passed to :meth:`forward`.
    """

    def __init__(self, input_dim: int, hidden_dims, out_dim: int, dropout: float = 0.0, seed=0):
        hidden_dims = tuple(int(h) for h in hidden_dims)
        if len(hidden_dims) > 5:
            raise ValueError("at most 5 hidden layers are supported")
        if any(h < 1 for h in hidden_dims):
            raise ValueError("hidden widths must be positive")
        if not (0.0 <= dropout < 1.0):
            raise ValueError("dropout must be in [0, 1)")
        self.input_dim = int(input_dim)
        self.hidden_dims = hidden_dims
        self.out_dim = int(out_dim)
        self.dropout = float(dropout)
        rng = np.random.default_rng(derive_seed(seed))
        dims = [self.input_dim, *hidden_dims, self.out_dim]
        self.params: list[np.ndarray] = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            scale = np.sqrt(2.0 / (fan_in + fan_out))
            self.params.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
            self.params.append(np.zeros(fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.hidden_dims) + 1

    def forward(self, x: np.ndarray, dropout_rng=None):
        """Return (outputs, cache). Pass ``dropout_rng`` to enable dropout."""
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ValueError(f"expected features of shape (n, {self.input_dim})")
        h = x
        inputs = []
        sig_acts = []
        masks = []
        for layer in range(len(self.hidden_dims)):
            w, b = self.params[2 * layer], self.params[2 * layer + 1]
            inputs.append(h)
            a = _sigmoid(h @ w + b)
            sig_acts.append(a)
            if dropout_rng is not None and self.dropout > 0.0:
                keep = dropout_rng.random(a.shape) >= self.dropout
                mask = keep / (1.0 - self.dropout)
                a = a * mask
            else:
                mask = None
            masks.append(mask)
            h = a
        inputs.append(h)
        w, b = self.params[-2], self.params[-1]
        out = h @ w + b
        return out, (inputs, sig_acts, masks)

    def backward(self, cache, dout: np.ndarray) -> list[np.ndarray]:
        """Parameter gradients for the forward pass that produced ``cache``."""
        inputs, sig_acts, masks = cache
        grads: list[np.ndarray] = [np.zeros_like(p) for p in self.params]
        grads[-2] = inputs[-1].T @ dout
        grads[-1] = dout.sum(axis=0)
        dh = dout @ self.params[-2].T
        for layer in range(len(self.hidden_dims) - 1, -1, -1):
            if masks[layer] is not None:
                dh = dh * masks[layer]
            a = sig_acts[layer]
            dz = dh * a * (1.0 - a)
            grads[2 * layer] = inputs[layer].T @ dz
            grads[2 * layer + 1] = dz.sum(axis=0)
            dh = dz @ self.params[2 * layer].T
        return grads

    def scores(self, x: np.ndarray) -> np.ndarray:
        out, _ = self.forward(x)
        return out

    def predict_attract(self, x: np.ndarray) -> np.ndarray:
        return _sigmoid(self.scores(x))

    def save(self, path) -> None:
        payload = {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "input_dim": self.input_dim,
            "hidden_dims": list(self.hidden_dims),
            "out_dim": self.out_dim,
            "dropout": self.dropout,
            "params": [p.tolist() for p in self.params],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh)

    @classmethod
    def load(cls, path) -> "Scorer":
        with open(path) as fh:
            payload = json.load(fh)
        if payload.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"not a scorer checkpoint: {path}")
        if payload.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
        scorer = cls(
            payload["input_dim"], payload["hidden_dims"], payload["out_dim"],
            dropout=payload["dropout"],
        )
        scorer.params = [np.asarray(p, dtype=np.float64) for p in payload["params"]]
        return scorer


def train_inprocess(
    dataset,
    exposure: ExposureTable,
    slots: int,
    max_len: int,
    hyper: AdamParams | None = None,
    estimator: str = "vlpl2",
    epochs: int = 1,
    n_samples: int = 1000,
    seed=0,
    scorer: Scorer | None = None,
    hidden=(32,),
    dropout: float = 0.0,
    val_dataset=None,
    early_stop_patience: int | None = None,
    val_samples: int = 1000,
):
    """Train a scorer by chaining the score-table gradient through the
    network, one update per query per epoch.

    With ``early_stop_patience`` and a ``val_dataset``, training stops
    once the validation objective has not improved for that many epochs
    and the best-scoring parameters are restored.
    """
    est_fn = ESTIMATORS[estimator]
    hyper = hyper or AdamParams(lr=1e-3)
    feature_dims = {q.features.shape[1] for q in dataset}
    if len(feature_dims) > 1:
        raise ValueError(f"queries disagree on feature dimension: {sorted(feature_dims)}")
    if scorer is None:
        dim = feature_dims.pop() if feature_dims else 0
        scorer = Scorer(dim, hidden, max_len, dropout=dropout, seed=derive_seed(seed, 0))
    state = AdamState.for_params(scorer.params, hyper)
    use_early_stop = early_stop_patience is not None and val_dataset
    best_val = -np.inf
    best_params = None
    stale = 0
    for epoch in range(epochs):
        for qi, query in enumerate(dataset):
            config = RankingConfig(query.features.shape[0], slots, max_len)
            drop_rng = (
                np.random.default_rng(derive_seed(seed, 1, epoch, qi))
                if scorer.dropout > 0.0
                else None
            )
            out, cache = scorer.forward(query.features, dropout_rng=drop_rng)
            grad_scores = est_fn(
                ScoreTable(out), query.attract, exposure, config,
                n_samples, seed=derive_seed(seed, 2, epoch, qi),
            ).grads
            grads = scorer.backward(cache, grad_scores)
            scorer.params = state.ascend(scorer.params, grads)
        if use_early_stop:
            val = _mean_policy_value(
                scorer, val_dataset, exposure, slots, max_len, val_samples,
                derive_seed(seed, 3, epoch),
            )
            if val > best_val:
                best_val = val
                best_params = [p.copy() for p in scorer.params]
                stale = 0
            else:
                stale += 1
                if stale > early_stop_patience:
                    break
    if use_early_stop and best_params is not None:
        scorer.params = best_params
    return scorer


def _mean_policy_value(scorer, dataset, exposure, slots, max_len, n_samples, seed):
    from .objective import expected_attractiveness_mc

    vals = []
    for qi, query in enumerate(dataset):
        config = RankingConfig(query.features.shape[0], slots, max_len)
        est = expected_attractiveness_mc(
            ScoreTable(scorer.scores(query.features)), query.attract, exposure,
            config, n_samples, derive_seed(seed, qi),
        )
        vals.append(est.value)
    return float(np.mean(vals))


def train_relevance_head(
    dataset,
    hyper: AdamParams | None = None,
    epochs: int = 1,
    seed=0,
    hidden=(32,),
    dropout: float = 0.0,
    scorer: Scorer | None = None,
):
    """Fit sigmoid(scorer) to the attractiveness labels with binary
    cross-entropy, one update per query per epoch."""
    hyper = hyper or AdamParams(lr=1e-3)
    max_len = dataset[0].attract.values.shape[1] if dataset else 1
    for q in dataset:
        labels = q.attract.values
        if np.any(labels < 0.0) or np.any(labels > 1.0):
            raise ValueError("attractiveness labels must lie in [0, 1]")
    if scorer is None:
        dim = dataset[0].features.shape[1] if dataset else 0
        scorer = Scorer(dim, hidden, max_len, dropout=dropout, seed=derive_seed(seed, 0))
    state = AdamState.for_params(scorer.params, hyper)
    for epoch in range(epochs):
        for qi, query in enumerate(dataset):
            drop_rng = (
                np.random.default_rng(derive_seed(seed, 1, epoch, qi))
                if scorer.dropout > 0.0
                else None
            )
            out, cache = scorer.forward(query.features, dropout_rng=drop_rng)
            p = _sigmoid(out)
            dout = (p - query.attract.values) / p.size
            grads = scorer.backward(cache, dout)
            scorer.params = state.descend(scorer.params, grads)
    return scorer


def bce_loss(scorer: Scorer, dataset) -> float:
    """Mean binary cross-entropy of the head's predictions over a dataset."""
    total = 0.0
    count = 0
    for q in dataset:
        p = np.clip(scorer.predict_attract(q.features), 1e-12, 1 - 1e-12)
        y = q.attract.values
        total += float(-(y * np.log(p) + (1 - y) * np.log(1 - p)).sum())
        count += p.size
    return total / max(count, 1)

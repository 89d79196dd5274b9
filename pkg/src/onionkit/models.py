"""Logistic regression, MLP and DANN trained with plain numpy, plus ANCOVA screening.

All three predictors share one parameter layout (:class:`NetworkParams`):

* ``extractor`` -- the shared feature extractor ``g``; every layer is
  followed by a rectifier.  Empty for logistic regression.
* ``label_head`` -- ``f_{Y_k}``; hidden layers use a rectifier, the final
  layer emits a single logit.
* ``confounder_heads`` -- one ``f_{Y_i}`` per confounder, reading the
  extractor output.  Binary confounders get a logit and cross-entropy,
  continuous ones a linear output and mean squared error.

DANN alternates two kinds of update.  The label step descends ``L_k`` in
both ``g`` and ``f_{Y_k}``.  Each adversary step descends ``L_i`` in the
heads ``f_{Y_i}`` and *ascends* ``sum_i L_i`` in ``g`` (gradient reversal).
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import stats

from .data_core import FLOAT_FMT, check_matrix
from .errors import ConfigError, DegenerateDesign, DimensionMismatch, NonFiniteLoss


@dataclass
class TrainConfig:
    learning_rate: float = 0.005
    batch_size: int = 64
    iterations: int = 6000
    hidden_units: int = 20
    # hidden width of each confounder head; None means hidden_units
    confounder_hidden_units: Optional[int] = None
    adversary_steps_per_label_step: int = 3
    # weights alpha_i of the selection metric L_k - sum_i alpha_i L_i; None means 1.0 each
    adversary_loss_weights: Optional[list] = None
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    l2: float = 0.0
    validation_fraction: float = 0.2
    checkpoint_every: int = 100
    select_checkpoint: bool = True
    seed: int = 0

    def __post_init__(self):
        for name in ("learning_rate", "batch_size", "iterations", "hidden_units",
                     "adversary_steps_per_label_step", "checkpoint_every"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.confounder_hidden_units is not None and self.confounder_hidden_units < 1:
            raise ConfigError("confounder_hidden_units must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")
        if self.l2 < 0:
            raise ConfigError("l2 must be non-negative")
        if not 0 <= self.validation_fraction < 1:
            raise ConfigError("validation_fraction must be in [0, 1)")
        if self.adversary_loss_weights is not None:
            if any(a < 0 for a in self.adversary_loss_weights):
                raise ConfigError("adversary_loss_weights must be non-negative")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown TrainConfig keys: {sorted(unknown)}")
        return cls(**d)

    def replace(self, **kw) -> "TrainConfig":
        d = asdict(self)
        d.update(kw)
        return TrainConfig(**d)


@dataclass
class LossRecord:
    step: int
    label_loss: float
    confounder_losses: list
    selection_metric: float
    accuracy: float = float("nan")


@dataclass
class NetworkParams:
    extractor: list = field(default_factory=list)
    label_head: list = field(default_factory=list)
    confounder_heads: list = field(default_factory=list)
    confounder_kinds: list = field(default_factory=list)
    # (mean, sd) used to standardize each continuous confounder target
    confounder_scaling: list = field(default_factory=list)

    def __post_init__(self):
        self._check_chain()

    def _check_chain(self):
        width = None
        for W, b in self.extractor + self.label_head:
            if width is not None and W.shape[0] != width:
                raise DimensionMismatch("layer dimensions do not chain")
            if b.shape != (W.shape[1],):
                raise DimensionMismatch("bias shape does not match weight matrix")
            width = W.shape[1]
        feat = self.feature_width
        for head in self.confounder_heads:
            width = feat
            for W, b in head:
                if W.shape[0] != width:
                    raise DimensionMismatch("confounder head does not chain onto extractor")
                width = W.shape[1]

    @property
    def input_dim(self) -> int:
        first = (self.extractor or self.label_head)[0][0]
        return first.shape[0]

    @property
    def feature_width(self) -> int:
        return self.extractor[-1][0].shape[1] if self.extractor else self.input_dim

    def groups(self) -> dict:
        """Named lists of ``(W, b)`` layers; the order fixes the flat layout."""
        out = {"extractor": self.extractor, "label_head": self.label_head}
        for i, head in enumerate(self.confounder_heads):
            out[f"confounder_head_{i}"] = head
        return out

    def arrays(self, group: Optional[str] = None) -> list:
        """Parameter arrays (views) of one group, or of all groups in order."""
        groups = self.groups()
        names = [group] if group else list(groups)
        return [a for name in names for layer in groups[name] for a in layer]

    def copy(self) -> "NetworkParams":
        cp = lambda layers: [(W.copy(), b.copy()) for W, b in layers]  # noqa: E731
        return NetworkParams(
            cp(self.extractor),
            cp(self.label_head),
            [cp(h) for h in self.confounder_heads],
            list(self.confounder_kinds),
            list(self.confounder_scaling),
        )

    @property
    def weights(self) -> np.ndarray:
        """Input weights of a linear model (logistic regression) as a flat vector."""
        if self.extractor or len(self.label_head) != 1:
            raise ValueError("weights is only defined for a single linear layer")
        return self.label_head[0][0][:, 0]


# ---------------------------------------------------------------------------
# forward / backward
# ---------------------------------------------------------------------------


def _forward(layers, h, relu_last):
    cache = []
    last = len(layers) - 1
    for j, (W, b) in enumerate(layers):
        z = h @ W + b
        cache.append((h, z))
        h = z if (j == last and not relu_last) else np.maximum(z, 0.0)
    return h, cache


def _backward(layers, cache, g, relu_last, need_input_grad=True):
    grads = [None] * len(layers)
    last = len(layers) - 1
    for j in range(last, -1, -1):
        h_in, z = cache[j]
        if j != last or relu_last:
            g = g * (z > 0)
        W = layers[j][0]
        grads[j] = (h_in.T @ g, g.sum(axis=0))
        if j or need_input_grad:
            g = g @ W.T
    return grads, g


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _bce_logits(z, y):
    """Mean binary cross-entropy of logits ``z`` against 0/1 targets, and d/dz."""
    loss = np.mean(np.logaddexp(0.0, z) - y * z)
    return loss, (sigmoid(z) - y) / y.size


def _mse(z, y):
    r = z - y
    return np.mean(r * r), 2.0 * r / y.size


def _l2_penalty(layers, l2):
    return 0.5 * l2 * sum(float(np.sum(W * W)) for W, _ in layers) if l2 else 0.0


def _add_l2(grads, layers, l2):
    if not l2:
        return grads
    return [(gW + l2 * W, gb) for (gW, gb), (W, _) in zip(grads, layers)]


def _confounder_target(params, i, values):
    mean, sd = params.confounder_scaling[i]
    return (values - mean) / sd


def label_loss_grads(params: NetworkParams, X, y, l2: float = 0.0):
    """``L_k`` on a batch and its gradients.

    Returns ``(loss, extractor_grads, label_head_grads)`` where each grads
    entry is a list of ``(dW, db)`` matching the layer list.
    """
    feat, ecache = _forward(params.extractor, X, relu_last=True)
    z, hcache = _forward(params.label_head, feat, relu_last=False)
    loss, dz = _bce_logits(z[:, 0], y)
    loss += _l2_penalty(params.extractor + params.label_head, l2)
    hgrads, dfeat = _backward(params.label_head, hcache, dz[:, None], relu_last=False,
                              need_input_grad=bool(params.extractor))
    egrads = []
    if params.extractor:
        egrads, _ = _backward(params.extractor, ecache, dfeat, relu_last=True,
                              need_input_grad=False)
    return (loss, _add_l2(egrads, params.extractor, l2),
            _add_l2(hgrads, params.label_head, l2))


def confounder_loss_grads(params: NetworkParams, X, confounders, l2: float = 0.0):
    """Per-confounder losses ``L_i`` and their gradients.

    Returns ``(losses, extractor_grads, head_grads)``: ``extractor_grads`` is
    the gradient of ``sum_i L_i`` with respect to the extractor and
    ``head_grads[i]`` the gradient of ``L_i`` with respect to head ``i``.
    """
    feat, ecache = _forward(params.extractor, X, relu_last=True)
    losses, head_grads = [], []
    dfeat = np.zeros_like(feat)
    for i, head in enumerate(params.confounder_heads):
        z, hcache = _forward(head, feat, relu_last=False)
        if params.confounder_kinds[i] == "binary":
            loss, dz = _bce_logits(z[:, 0], confounders[i])
        else:
            loss, dz = _mse(z[:, 0], _confounder_target(params, i, confounders[i]))
        loss += _l2_penalty(head, l2)
        g, dfi = _backward(head, hcache, dz[:, None], relu_last=False)
        losses.append(loss)
        head_grads.append(_add_l2(g, head, l2))
        dfeat += dfi
    egrads = []
    if params.extractor:
        egrads, _ = _backward(params.extractor, ecache, dfeat, relu_last=True,
                              need_input_grad=False)
    return losses, egrads, head_grads


def _flat(grads):
    return [a for layer in grads for a in layer]


def predict_logits(params: NetworkParams, X) -> np.ndarray:
    X = check_matrix(X)
    if X.shape[1] != params.input_dim:
        raise DimensionMismatch(f"model expects {params.input_dim} features, got {X.shape[1]}")
    feat, _ = _forward(params.extractor, X, relu_last=True)
    z, _ = _forward(params.label_head, feat, relu_last=False)
    return z[:, 0]


def predict_proba(params: NetworkParams, X) -> np.ndarray:
    """Probability of label 1 for each row of ``X``."""
    return sigmoid(predict_logits(params, X))


def predict_confounder(params: NetworkParams, X, i: int) -> np.ndarray:
    """Output of confounder head ``i``: a probability, or a value on the original scale."""
    X = check_matrix(X)
    feat, _ = _forward(params.extractor, X, relu_last=True)
    z, _ = _forward(params.confounder_heads[i], feat, relu_last=False)
    if params.confounder_kinds[i] == "binary":
        return sigmoid(z[:, 0])
    mean, sd = params.confounder_scaling[i]
    return z[:, 0] * sd + mean


# ---------------------------------------------------------------------------
# optimizers
# ---------------------------------------------------------------------------


class Adam:
    def __init__(self, arrays, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.arrays = arrays
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        sizes = [a.size for a in arrays]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        # moments are kept flat so one step costs a handful of vector ops
        self.m = np.zeros(self.offsets[-1])
        self.v = np.zeros(self.offsets[-1])
        self.t = 0

    def step(self, grads):
        """Move every array against its gradient, in place."""
        if not self.arrays:
            return
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        lr_t = self.lr * np.sqrt(1 - b2 ** self.t) / (1 - b1 ** self.t)
        g = np.concatenate([x.ravel() for x in grads])
        self.m *= b1
        self.m += (1 - b1) * g
        self.v *= b2
        self.v += (1 - b2) * (g * g)
        delta = lr_t * self.m / (np.sqrt(self.v) + self.eps)
        off = self.offsets
        for j, a in enumerate(self.arrays):
            a -= delta[off[j]:off[j + 1]].reshape(a.shape)


class SGD:
    def __init__(self, arrays, lr, **_):
        self.arrays = arrays
        self.lr = lr

    def step(self, grads):
        for a, g in zip(self.arrays, grads):
            a -= self.lr * g


def make_optimizer(arrays, config: TrainConfig):
    if config.optimizer == "sgd":
        return SGD(arrays, config.learning_rate)
    return Adam(arrays, config.learning_rate, config.beta1, config.beta2, config.epsilon)


class DannUpdater:
    """Applies the two DANN update rules to a parameter set in place.

    ``label_step`` descends ``L_k`` in extractor and label head.
    ``adversary_step`` descends each ``L_i`` in its head and ascends
    ``sum_i L_i`` in the extractor.  Each rule keeps its own optimizer
    state, so the extractor's opposing gradients never share moments.
    """

    def __init__(self, params: NetworkParams, config: TrainConfig):
        self.params = params
        self.l2 = config.l2
        self.label_opt = make_optimizer(
            params.arrays("extractor") + params.arrays("label_head"), config)
        self.reverse_opt = make_optimizer(params.arrays("extractor"), config)
        heads = [a for i in range(len(params.confounder_heads))
                 for a in params.arrays(f"confounder_head_{i}")]
        self.head_opt = make_optimizer(heads, config)

    def label_step(self, X, y) -> float:
        loss, eg, hg = label_loss_grads(self.params, X, y, self.l2)
        if not np.isfinite(loss):
            raise NonFiniteLoss(f"label loss became {loss}")
        self.label_opt.step(_flat(eg) + _flat(hg))
        return loss

    def adversary_step(self, X, confounders, heads=True, extractor=True) -> list:
        losses, eg, hg = confounder_loss_grads(self.params, X, confounders, self.l2)
        if not all(np.isfinite(losses)):
            raise NonFiniteLoss(f"confounder losses became {losses}")
        if heads:
            self.head_opt.step([a for g in hg for a in _flat(g)])
        if extractor and eg:
            # gradient reversal: ascend the confounder losses in the extractor
            self.reverse_opt.step([-a for a in _flat(eg)])
        return losses


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def _glorot(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out)), np.zeros(fan_out)


def init_network(p: int, hidden_units: Optional[int], rng, confounder_kinds=(),
                 confounder_hidden_units: Optional[int] = None) -> NetworkParams:
    """Glorot-uniform weights, zero biases.  ``hidden_units=None`` gives a linear model."""
    if hidden_units is None:
        if confounder_kinds:
            raise ConfigError("a linear model cannot carry confounder heads")
        return NetworkParams([], [(np.zeros((p, 1)), np.zeros(1))])
    extractor = [_glorot(rng, p, hidden_units)]
    label_head = [_glorot(rng, hidden_units, 1)]
    ch = confounder_hidden_units or hidden_units
    heads = [[_glorot(rng, hidden_units, ch), _glorot(rng, ch, 1)] for _ in confounder_kinds]
    return NetworkParams(extractor, label_head, heads, list(confounder_kinds),
                         [(0.0, 1.0)] * len(confounder_kinds))


def stratified_split(y, fraction: float, rng):
    """Indices ``(train, holdout)`` with ``fraction`` of each class held out."""
    y = np.asarray(y)
    hold = []
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(idx.size)]
        k = int(round(fraction * idx.size))
        if idx.size > 1:
            k = min(max(k, 1), idx.size - 1) if fraction > 0 else 0
        else:
            k = 0
        hold.append(idx[:k])
    hold = np.sort(np.concatenate(hold)).astype(int)
    keep = np.setdiff1d(np.arange(y.size), hold)
    return keep, hold


def _check_xy(X, y):
    X = check_matrix(X)
    y = np.asarray(y, dtype=float).ravel()
    if y.size != X.shape[0]:
        raise DimensionMismatch(f"X has {X.shape[0]} rows, y has {y.size}")
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise ValueError("labels must be 0 or 1")
    return X, y


def _accuracy(params, X, y):
    return float(np.mean((predict_logits(params, X) > 0) == (y > 0.5)))


def _evaluate(params, X, y, confs, step, weights, l2):
    lk = label_loss_grads(params, X, y, l2)[0]
    li = confounder_loss_grads(params, X, confs, l2)[0] if params.confounder_heads else []
    metric = lk - sum(a * l for a, l in zip(weights, li))
    return LossRecord(step, float(lk), [float(v) for v in li], float(metric),
                      _accuracy(params, X, y))


def _train(X, y, confounders, kinds, config: TrainConfig, validation, hidden, selection):
    """Shared mini-batch loop for all three model types.

    ``selection`` is ``"accuracy"`` (maximize), ``"adversarial"``
    (minimize ``L_k - sum alpha_i L_i``) or ``None`` (keep the last
    iterate).  Checkpoints are scored on the validation data.
    """
    X, y = _check_xy(X, y)
    confounders = [np.asarray(c, dtype=float).ravel() for c in confounders]
    for c in confounders:
        if c.size != y.size:
            raise DimensionMismatch("confounder length does not match labels")
    weights = config.adversary_loss_weights
    if weights is None:
        weights = [1.0] * len(confounders)
    if len(weights) != len(confounders):
        raise ConfigError(
            f"{len(weights)} adversary weights for {len(confounders)} confounders")

    rng = np.random.default_rng(config.seed)
    if validation is None and selection is not None and config.validation_fraction > 0:
        keep, hold = stratified_split(y, config.validation_fraction, rng)
        validation = (X[hold], y[hold], [c[hold] for c in confounders])
        X, y, confounders = X[keep], y[keep], [c[keep] for c in confounders]
    if validation is None:
        validation = (X, y, confounders)
    Xv, yv, cv = validation
    Xv, yv = _check_xy(Xv, yv)
    cv = [np.asarray(c, dtype=float).ravel() for c in cv]

    params = init_network(X.shape[1], hidden, rng, kinds, config.confounder_hidden_units)
    for i, (kind, c) in enumerate(zip(kinds, confounders)):
        if kind == "continuous":
            sd = float(c.std())
            params.confounder_scaling[i] = (float(c.mean()), sd if sd > 0 else 1.0)
    updater = DannUpdater(params, config)

    n = y.size
    history = []
    best, best_score = params.copy(), None
    for step in range(1, config.iterations + 1):
        idx = rng.integers(0, n, config.batch_size)
        updater.label_step(X[idx], y[idx])
        if confounders:
            for _ in range(config.adversary_steps_per_label_step):
                idx = rng.integers(0, n, config.batch_size)
                updater.adversary_step(X[idx], [c[idx] for c in confounders])
        if step % config.checkpoint_every == 0 or step == config.iterations:
            rec = _evaluate(params, Xv, yv, cv, step, weights, config.l2)
            if not np.isfinite(rec.label_loss):
                raise NonFiniteLoss(f"validation loss became {rec.label_loss}")
            history.append(rec)
            if selection == "accuracy":
                score = -rec.accuracy
            elif selection == "adversarial":
                score = rec.selection_metric
            else:
                score = None
            if score is not None and (best_score is None or score < best_score):
                best, best_score = params.copy(), score
    if selection is None or not config.select_checkpoint:
        best = params
    return best, history


def logreg_fit(X, y, config: Optional[TrainConfig] = None, return_history: bool = False):
    """Logistic regression by mini-batch Adam on mean cross-entropy (last iterate kept)."""
    config = config or TrainConfig()
    params, history = _train(X, y, [], [], config, None, None, None)
    return (params, history) if return_history else params


def mlp_fit(X, y, config: Optional[TrainConfig] = None, validation=None,
            return_history: bool = False):
    """One-hidden-layer rectifier network; checkpoint chosen by validation accuracy.

    ``validation`` is an optional ``(X_val, y_val)`` pair; without it a
    stratified ``config.validation_fraction`` of the training data is held out.
    """
    config = config or TrainConfig()
    if validation is not None:
        validation = (validation[0], validation[1], [])
    params, history = _train(X, y, [], [], config, validation, config.hidden_units,
                             "accuracy")
    return (params, history) if return_history else params


def dann_fit(X, y, confounders, config: Optional[TrainConfig] = None, validation=None,
             kinds=None):
    """Domain-adversarial network.

    Parameters
    ----------
    X, y : training data and 0/1 labels.
    confounders : list of length-n vectors ``Y_1..Y_{k-1}``.
    config : TrainConfig
    validation : optional ``(X_val, y_val, confounders_val)``.  Without it a
        stratified holdout is carved from the training data.
    kinds : list of ``"binary"``/``"continuous"``; inferred from the values
        when omitted.

    Returns
    -------
    (NetworkParams, list of LossRecord)
        The checkpoint with the smallest validation ``L_k - sum alpha_i L_i``
        and the checkpoint history.
    """
    config = config or TrainConfig()
    confounders = [np.asarray(c, dtype=float).ravel() for c in confounders]
    if kinds is None:
        kinds = ["binary" if np.all(np.isin(c, (0.0, 1.0))) else "continuous"
                 for c in confounders]
    if len(kinds) != len(confounders):
        raise ConfigError("one kind per confounder required")
    return _train(X, y, confounders, list(kinds), config, validation, config.hidden_units,
                  "adversarial")


# ---------------------------------------------------------------------------
# ANCOVA screening
# ---------------------------------------------------------------------------


def confounder_residuals(X, confounders) -> np.ndarray:
    """Residuals of every column of ``X`` after least-squares regression on the confounders."""
    X = check_matrix(X)
    n = X.shape[0]
    D = np.column_stack([np.ones(n)] + [np.asarray(c, dtype=float).ravel() for c in confounders])
    if np.linalg.matrix_rank(D) < D.shape[1]:
        raise DegenerateDesign("confounder design matrix is rank-deficient")
    coef, *_ = np.linalg.lstsq(D, X, rcond=None)
    return X - D @ coef


def ancova_pvalues(X, y, confounders) -> np.ndarray:
    """Two-sample t-test p-value per feature on confounder-adjusted residuals."""
    X, y = _check_xy(X, y)
    if X.shape[0] <= len(confounders) + 2:
        raise DegenerateDesign("need more samples than confounders + 2")
    R = confounder_residuals(X, confounders)
    scale = np.abs(X).max(axis=0)
    # columns fully explained by the confounders carry no residual signal
    dead = np.abs(R).max(axis=0) <= 1e-10 * np.maximum(scale, 1e-300)
    with np.errstate(invalid="ignore", divide="ignore"):
        _, pvals = stats.ttest_ind(R[y == 1], R[y == 0], axis=0)
    pvals = np.where(np.isnan(pvals) | dead, 1.0, pvals)
    return pvals


def ancova_filter(X, y, confounders, alpha_level: float = 0.05) -> np.ndarray:
    """Sorted indices of features whose adjusted association with ``y`` has p < ``alpha_level``."""
    return np.flatnonzero(ancova_pvalues(X, y, confounders) < alpha_level)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def save_model(path, params: NetworkParams, config: Optional[TrainConfig] = None,
               history=None, extra: Optional[dict] = None) -> Path:
    """JSON with layer shapes and row-major flat parameters; history goes to ``*.loss.csv``."""
    path = Path(path)
    layers = []
    for group, layer_list in params.groups().items():
        for j, (W, b) in enumerate(layer_list):
            layers.append({"group": group, "index": j, "weight_shape": list(W.shape),
                           "weight": W.ravel().tolist(), "bias": b.tolist()})
    doc = {
        "layers": layers,
        "confounder_kinds": params.confounder_kinds,
        "confounder_scaling": [list(s) for s in params.confounder_scaling],
        "config": asdict(config) if config is not None else None,
    }
    if extra:
        doc.update(extra)
    path.write_text(json.dumps(doc, indent=1) + "\n")
    if history is not None:
        write_history(path.with_suffix(".loss.csv"), history)
    return path


def write_history(path, history) -> Path:
    path = Path(path)
    width = max((len(r.confounder_losses) for r in history), default=0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "label_loss"] + [f"confounder_loss_{i + 1}" for i in range(width)]
                   + ["selection_metric", "accuracy"])
        for r in history:
            w.writerow([r.step, FLOAT_FMT % r.label_loss]
                       + [FLOAT_FMT % v for v in r.confounder_losses]
                       + [FLOAT_FMT % r.selection_metric, FLOAT_FMT % r.accuracy])
    return path


def load_model(path):
    """Returns ``(params, config_or_None)``."""
    doc = json.loads(Path(path).read_text())
    groups = {}
    for layer in doc["layers"]:
        W = np.array(layer["weight"], dtype=float).reshape(layer["weight_shape"])
        groups.setdefault(layer["group"], []).append((W, np.array(layer["bias"], dtype=float)))
    heads = [groups[k] for k in sorted((k for k in groups if k.startswith("confounder_head_")),
                                       key=lambda s: int(s.rsplit("_", 1)[1]))]
    params = NetworkParams(
        groups.get("extractor", []),
        groups.get("label_head", []),
        heads,
        doc.get("confounder_kinds", []),
        [tuple(s) for s in doc.get("confounder_scaling", [])],
    )
    cfg = TrainConfig.from_dict(doc["config"]) if doc.get("config") else None
    return params, cfg

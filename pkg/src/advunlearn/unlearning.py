"""Forget-set unlearning: random relabelling, adversarial surrogates and EWC.

Strategies
----------
``random_label``
    Train on the forget set with fixed wrong labels only.
``adv``
    Additionally train on targeted-PGD samples generated once from the
    pre-unlearning model.
``adv_ela``
    ``adv`` plus a Fisher-weighted quadratic anchor to the pre-unlearning
    parameters.
``remain_involved``
    Random relabelling plus plain cross-entropy on the remain set.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field

import numpy as np

from .attacks import AdversarialSet, AttackConfig, draw_wrong_label, generate_adversarial_set
from .data import LabeledDataset
from .model import Adam, Classifier, ShapeError

STRATEGIES = ("adv", "adv_ela", "random_label", "remain_involved")


class ConfigError(ValueError):
    pass


@dataclass
class RelabeledForgetSet:
    X: np.ndarray
    y_true: np.ndarray
    y_wrong: np.ndarray

    def __len__(self):
        return len(self.y_true)


@dataclass
class LossWeights:
    mis: float = 0.1
    adv: float = 1.0
    ewc: float = 1e3

    def __post_init__(self):
        w = (self.mis, self.adv, self.ewc)
        if min(w) < 0 or max(w) == 0:
            raise ConfigError(f"loss weights {w} must be non-negative and not all zero")


@dataclass
class UnlearnConfig:
    strategy: str = "adv_ela"
    forget_count: int = 10
    epochs: int = 15
    batch_size: int = 16
    lr: float = 1e-3
    weights: LossWeights = field(default_factory=LossWeights)
    attack: AttackConfig = field(default_factory=AttackConfig)
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if self.epochs < 1 or self.batch_size < 1 or self.forget_count < 1:
            raise ConfigError("epochs, batch_size and forget_count must be >= 1")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class UnlearnReport:
    strategy: str
    epochs: list[dict] = field(default_factory=list)
    adv_set_checksum: str | None = None
    fisher_checksum: str | None = None
    n_adversarial: int = 0
    config: dict | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def random_relabel(forget_set: LabeledDataset, class_count: int, rng) -> RelabeledForgetSet:
    rng = np.random.default_rng(rng)
    if class_count < 2:
        raise ConfigError("no wrong label exists with fewer than two classes")
    wrong = np.array([draw_wrong_label(int(y), class_count, rng) for y in forget_set.y], dtype=np.int64)
    return RelabeledForgetSet(forget_set.X.copy(), forget_set.y.copy(), wrong)


def misclassification_loss(model: Classifier, relabeled: RelabeledForgetSet) -> float:
    return model.loss(relabeled.X, relabeled.y_wrong)


def adversarial_loss(model: Classifier, adv_set: AdversarialSet) -> float:
    return model.loss(adv_set.X, adv_set.targets)


def compute_fisher(model: Classifier, relabeled: RelabeledForgetSet) -> np.ndarray:
    """Empirical diagonal Fisher on the wrong labels: mean squared per-sample gradient."""
    if len(relabeled) == 0:
        raise ConfigError("empty relabeled set")
    return model.squared_grad_mean(relabeled.X, relabeled.y_wrong)


def ewc_penalty(params, snapshot, fisher) -> float:
    """``sum_k F_k (theta_k - theta*_k)^2``; ``params`` may be a Classifier."""
    theta = params.get_params() if isinstance(params, Classifier) else np.asarray(params, dtype=float)
    snapshot, fisher = np.asarray(snapshot, dtype=float), np.asarray(fisher, dtype=float)
    if not theta.shape == snapshot.shape == fisher.shape:
        raise ShapeError(f"misaligned EWC inputs {theta.shape}, {snapshot.shape}, {fisher.shape}")
    diff = theta - snapshot
    return float(np.dot(fisher, diff * diff))


def combined_loss(model, relabeled, adv_set, snapshot, fisher, weights: LossWeights) -> float:
    total = 0.0
    if weights.mis:
        total += weights.mis * misclassification_loss(model, relabeled)
    if weights.adv:
        total += weights.adv * adversarial_loss(model, adv_set)
    if weights.ewc:
        total += weights.ewc * ewc_penalty(model, snapshot, fisher)
    return total


def _checksum(a) -> str:
    return hashlib.sha256(np.ascontiguousarray(a).tobytes()).hexdigest()


def _kind_weights(kinds, coeffs):
    """Per-sample weights giving ``sum_k coeff_k * mean(CE over kind k in batch)``."""
    w = np.zeros(len(kinds))
    for k, c in enumerate(coeffs):
        mask = kinds == k
        cnt = mask.sum()
        if cnt and c:
            w[mask] = c / cnt
    return w


def unlearn(model: Classifier, forget_set: LabeledDataset, cfg: UnlearnConfig,
            remain_set: LabeledDataset | None = None):
    """Run one unlearning strategy; returns ``(new_model, UnlearnReport)``.

    The input model is left untouched. Relabelled targets, the adversarial
    set and the Fisher diagonal are all fixed before the first update.
    """
    if len(forget_set) == 0:
        raise ConfigError("empty forget set")
    if cfg.strategy == "remain_involved":
        if remain_set is None or len(remain_set) == 0:
            raise ConfigError("strategy 'remain_involved' needs a remain set")
    elif remain_set is not None:
        raise ConfigError(f"strategy {cfg.strategy!r} must not be given a remain set")

    ss = np.random.SeedSequence(cfg.seed)
    relabel_seed, shuffle_seed = ss.spawn(2)
    C = model.class_count
    relabeled = random_relabel(forget_set, C, relabel_seed)
    report = UnlearnReport(cfg.strategy, config=cfg.to_dict())

    # pools: kind 0 = relabeled forget, kind 1 = adversarial or remain samples
    Xs, ys, kinds = [relabeled.X], [relabeled.y_wrong], [np.zeros(len(relabeled), dtype=np.int64)]
    adv_set = snapshot = fisher = None
    if cfg.strategy == "random_label":
        coeffs = (1.0, 0.0)
        ewc_weight = 0.0
    elif cfg.strategy == "remain_involved":
        coeffs = (1.0, 1.0)
        ewc_weight = 0.0
        Xs.append(remain_set.X)
        ys.append(remain_set.y)
        kinds.append(np.ones(len(remain_set), dtype=np.int64))
    else:
        coeffs = (cfg.weights.mis, cfg.weights.adv)
        ewc_weight = cfg.weights.ewc if cfg.strategy == "adv_ela" else 0.0
        adv_set = generate_adversarial_set(model, forget_set, cfg.attack)
        report.adv_set_checksum = adv_set.checksum()
        report.n_adversarial = len(adv_set)
        Xs.append(adv_set.X)
        ys.append(adv_set.targets)
        kinds.append(np.ones(len(adv_set), dtype=np.int64))
        if cfg.strategy == "adv_ela":
            snapshot = model.get_params()
            fisher = compute_fisher(model, relabeled)
            report.fisher_checksum = _checksum(fisher)

    X, y, kind = np.vstack(Xs), np.concatenate(ys), np.concatenate(kinds)
    net = model.copy()
    opt = Adam(lr=cfg.lr)
    shuffle_rng = np.random.default_rng(shuffle_seed)
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(len(y))
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            w = _kind_weights(kind[idx], coeffs)
            grad = net.grad_params(X[idx], y[idx], sample_weight=w)
            if ewc_weight:
                grad += ewc_weight * 2.0 * fisher * (net.get_params() - snapshot)
            opt.step(net, grad)
        report.epochs.append(_epoch_losses(net, epoch + 1, relabeled, X, y, kind, coeffs,
                                           ewc_weight, snapshot, fisher, cfg.strategy))

    if adv_set is not None and adv_set.checksum() != report.adv_set_checksum:
        raise RuntimeError("adversarial set changed during training")
    if fisher is not None and _checksum(fisher) != report.fisher_checksum:
        raise RuntimeError("Fisher diagonal changed during training")
    return net, report


def _epoch_losses(net, epoch, relabeled, X, y, kind, coeffs, ewc_weight, snapshot, fisher, strategy):
    l_mis = misclassification_loss(net, relabeled)
    other = kind == 1
    l_other = net.loss(X[other], y[other]) if other.any() else 0.0
    l_ewc = ewc_penalty(net, snapshot, fisher) if fisher is not None else 0.0
    row = {
        "epoch": epoch,
        "L_mis": l_mis,
        "L_adv": l_other if strategy in ("adv", "adv_ela") else 0.0,
        "L_ewc": l_ewc,
    }
    if strategy == "remain_involved":
        row["L_remain"] = l_other
    row["L_total"] = coeffs[0] * l_mis + coeffs[1] * l_other + ewc_weight * l_ewc
    return row

"""Targeted PGD for synthesising surrogate training data from the forget set."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .model import Classifier


class AttackError(ValueError):
    pass


@dataclass
class AttackConfig:
    tau: float = 0.5
    sigma: float | None = None  # None -> 2.5 * tau / steps
    steps: int = 50
    per_sample: int = 20
    seed: int = 0
    clip_every_step: bool = True
    # Ascend the targeted loss instead of descending it (literal "+" update).
    ascent: bool = False

    def __post_init__(self):
        if self.tau <= 0:
            raise AttackError("tau must be positive")
        if self.steps < 1 or self.per_sample < 1:
            raise AttackError("steps and per_sample must be >= 1")
        if self.sigma is not None and self.sigma < 0:
            raise AttackError("sigma must be non-negative")

    @property
    def step_size(self) -> float:
        return 2.5 * self.tau / self.steps if self.sigma is None else self.sigma


@dataclass
class AdversarialSet:
    """``M`` adversarial replicas per forget-set sample, stored row-wise."""

    X: np.ndarray
    targets: np.ndarray
    source_index: np.ndarray
    replica_index: np.ndarray  # 1..M

    def __len__(self):
        return len(self.targets)

    def checksum(self) -> str:
        h = hashlib.sha256()
        for a in (self.X, self.targets, self.source_index, self.replica_index):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()


def draw_wrong_label(label: int, class_count: int, rng) -> int:
    """Uniform draw from the ``class_count - 1`` classes other than ``label``."""
    if class_count < 2:
        raise AttackError("no wrong label exists with fewer than two classes")
    r = int(rng.integers(class_count - 1))
    return r if r < label else r + 1


def assign_targets(labels, M: int, class_count: int, rng):
    """``M`` independent wrong target labels per sample, as (source_index, target) pairs."""
    if class_count < 2:
        raise AttackError("no wrong label exists with fewer than two classes")
    rng = np.random.default_rng(rng)
    return [(i, draw_wrong_label(int(y), class_count, rng)) for i, y in enumerate(labels) for _ in range(M)]


def init_perturbation(x, tau: float, rng) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    rng = np.random.default_rng(rng)
    # uniform on [-tau, tau); redraw the measure-zero endpoint so the bound is strict
    u = rng.uniform(-tau, tau, size=x.shape)
    while np.any(u == -tau):
        bad = u == -tau
        u[bad] = rng.uniform(-tau, tau, size=int(bad.sum()))
    return x + u


def fgsm_step(model: Classifier, x, target, sigma: float, ascent: bool = False) -> np.ndarray:
    """One signed-gradient step on the cross-entropy toward ``target``.

    Works on a single sample or a batch (``target`` then being an array).
    Descends the loss by default, so the iterate moves toward the target
    class.
    """
    g = model.grad_input(x, target)
    if not np.all(np.isfinite(g)):
        raise AttackError("non-finite input gradient")
    direction = np.sign(g)
    return x + sigma * direction if ascent else x - sigma * direction


def _run_pgd(model, x0, x_start, targets, cfg: AttackConfig):
    lo, hi = x0 - cfg.tau, x0 + cfg.tau
    x = x_start
    sigma = cfg.step_size
    for _ in range(cfg.steps):
        x = fgsm_step(model, x, targets, sigma, cfg.ascent)
        if cfg.clip_every_step:
            x = np.clip(x, lo, hi)
    return np.clip(x, lo, hi)


def pgd_attack(model: Classifier, x, target: int, cfg: AttackConfig, rng) -> np.ndarray:
    """Random start inside the tau-ball, ``cfg.steps`` FGSM steps, tau-ball projection."""
    x = np.asarray(x, dtype=float)
    start = init_perturbation(x, cfg.tau, rng)
    return _run_pgd(model, x, start, target, cfg)


def replica_rng(seed: int, source_index: int, replica_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, source_index, replica_index]))


def generate_adversarial_set(model: Classifier, forget_set, cfg: AttackConfig) -> AdversarialSet:
    """Adversarial replicas for every forget-set sample.

    Each replica draws its target and its starting noise from a stream
    keyed by ``(seed, source_index, replica_index)``, so the result does
    not depend on the processing order. The PGD iterations run batched;
    rows never interact.
    """
    if len(forget_set) == 0:
        raise AttackError("empty forget set")
    M, C = cfg.per_sample, model.class_count
    n = len(forget_set)
    src = np.repeat(np.arange(n), M)
    rep = np.tile(np.arange(1, M + 1), n)
    targets = np.empty(n * M, dtype=np.int64)
    starts = np.empty((n * M, forget_set.feature_dim))
    x0 = forget_set.X[src]
    for row, (i, j) in enumerate(zip(src, rep)):
        rng = replica_rng(cfg.seed, int(i), int(j))
        targets[row] = draw_wrong_label(int(forget_set.y[i]), C, rng)
        starts[row] = init_perturbation(x0[row], cfg.tau, rng)
    X = _run_pgd(model, x0, starts, targets, cfg)
    return AdversarialSet(X, targets, src, rep)

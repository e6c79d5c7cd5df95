"""Adversarial-distribution constraints: FGSM and PGD input perturbations.

Attacks maximize a differentiable loss over an l-infinity ball around each
sample by iterated signed-gradient ascent with projection back onto the
ball (and then into the feature box, when one is declared). The clean
sample always competes as a candidate, so an attack never reports a loss
below the unperturbed one. Wrapping a dataset in `adversarial_constraint`
yields a constraint whose sample set is regenerated against the current
model on every slack or gradient evaluation; nothing is ever cached across
model states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ConstraintSpec, Dataset, DatasetProvider, LossSpec, Sample, loss_values
from .errors import ConfigurationError
from .models import ModelState, grad_input_batch, predict_batch


@dataclass(frozen=True)
class AttackConfig:
    """Perturbation budget and schedule for one attack.

    FGSM is the single-step special case (steps=1, step_size=epsilon).
    The stock PGD schedules follow the usual split between a cheap training
    attack (5 steps of epsilon/3, no extra restarts) and a strong evaluation
    attack (50 steps of epsilon/30, worst case over 10 restarts).
    """

    kind: str
    epsilon: float
    steps: int = 1
    step_size: float = 0.0
    restarts: int = 1
    clamp_box: tuple[float, float] | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("fgsm", "pgd"):
            raise ConfigurationError(f"unknown attack kind {self.kind!r}")
        if not (math.isfinite(self.epsilon) and self.epsilon >= 0):
            raise ConfigurationError("epsilon must be >= 0")
        if self.steps < 1:
            raise ConfigurationError("steps must be >= 1")
        if self.restarts < 1:
            raise ConfigurationError("restarts must be >= 1")
        if self.step_size < 0:
            raise ConfigurationError("step_size must be >= 0")
        if self.kind == "fgsm" and (self.steps != 1 or self.step_size != self.epsilon):
            raise ConfigurationError("fgsm requires steps=1 and step_size=epsilon")
        if self.clamp_box is not None:
            lo, hi = self.clamp_box
            if not lo < hi:
                raise ConfigurationError(f"clamp_box must satisfy lo < hi, got {self.clamp_box}")

    @classmethod
    def fgsm(cls, epsilon: float, clamp_box=None, seed: int = 0) -> AttackConfig:
        return cls(kind="fgsm", epsilon=epsilon, steps=1, step_size=epsilon,
                   clamp_box=clamp_box, seed=seed)

    @classmethod
    def pgd_training(cls, epsilon: float, clamp_box=None, seed: int = 0) -> AttackConfig:
        return cls(kind="pgd", epsilon=epsilon, steps=5, step_size=epsilon / 3.0,
                   restarts=1, clamp_box=clamp_box, seed=seed)

    @classmethod
    def pgd_evaluation(cls, epsilon: float, clamp_box=None, seed: int = 0) -> AttackConfig:
        return cls(kind="pgd", epsilon=epsilon, steps=50, step_size=epsilon / 30.0,
                   restarts=10, clamp_box=clamp_box, seed=seed)


def _project(X_adv: np.ndarray, X0: np.ndarray, cfg: AttackConfig) -> np.ndarray:
    # Ball first, then box; order recorded in run metadata by the CLI.
    out = np.clip(X_adv, X0 - cfg.epsilon, X0 + cfg.epsilon)
    if cfg.clamp_box is not None:
        out = np.clip(out, cfg.clamp_box[0], cfg.clamp_box[1])
    return out


def _restart_starts(X0: np.ndarray, cfg: AttackConfig, restart: int,
                    sample_seeds: np.ndarray) -> np.ndarray:
    if restart == 0:
        return X0.copy()
    deltas = np.empty_like(X0)
    for n in range(X0.shape[0]):
        rng = np.random.default_rng(int(sample_seeds[n]))
        # Skip draws consumed by earlier restarts so each restart is fresh
        # yet reproducible per (seed, sample index).
        draws = rng.uniform(-cfg.epsilon, cfg.epsilon,
                            size=(restart, X0.shape[1]))
        deltas[n] = draws[-1]
    return _project(X0 + deltas, X0, cfg)


def perturb_batch(model: ModelState, loss: LossSpec, X: np.ndarray,
                  labels: np.ndarray, cfg: AttackConfig,
                  sample_indices: np.ndarray | None = None) -> np.ndarray:
    """Attack every row of X at once; returns the perturbed feature matrix.

    Restart randomness is keyed by cfg.seed XOR the sample index, so attacks
    are reproducible and independent of how samples are batched.
    """
    X0 = np.asarray(X, dtype=float)
    y = np.asarray(labels)
    if cfg.epsilon == 0.0:
        return X0.copy()
    if sample_indices is None:
        sample_indices = np.arange(X0.shape[0])
    sample_seeds = np.asarray([cfg.seed ^ int(i) for i in sample_indices])

    best_X = X0.copy()
    best_loss = loss_values(loss, predict_batch(model, X0), y)
    for restart in range(cfg.restarts):
        X_adv = _restart_starts(X0, cfg, restart, sample_seeds)
        for _ in range(cfg.steps):
            g = grad_input_batch(model, loss, X_adv, y)
            X_adv = _project(X_adv + cfg.step_size * np.sign(g), X0, cfg)
            assert np.all(np.abs(X_adv - X0) <= cfg.epsilon + 1e-12)
        cand_loss = loss_values(loss, predict_batch(model, X_adv), y)
        better = cand_loss > best_loss
        best_X[better] = X_adv[better]
        best_loss = np.maximum(best_loss, cand_loss)
    return best_X


def perturb(model: ModelState, loss: LossSpec, sample: Sample, cfg: AttackConfig) -> Sample:
    """Loss-maximizing perturbation of one sample within the epsilon ball.

    The label is untouched; the zero perturbation is always a candidate, so
    the returned sample never has lower loss than the original.
    """
    X = perturb_batch(model, loss, sample.features[None, :],
                      np.asarray([sample.label]), cfg)
    return Sample(features=X[0], label=sample.label)


class AdversarialDataset(DatasetProvider):
    """Model-dependent dataset: the base set attacked against the current model."""

    def __init__(self, base: Dataset, loss: LossSpec, cfg: AttackConfig) -> None:
        self.base = base
        self.loss = loss
        self.cfg = cfg

    @property
    def name(self) -> str:
        return f"{self.base.name}@adversarial"

    def realize(self, model: ModelState) -> Dataset:
        X = perturb_batch(model, self.loss, self.base.features, self.base.labels,
                          self.cfg)
        return Dataset(features=X, labels=self.base.labels, name=self.name)

    def realize_subset(self, model: ModelState, indices: np.ndarray) -> Dataset:
        idx = np.asarray(indices, dtype=int)
        X = perturb_batch(model, self.loss, self.base.features[idx],
                          self.base.labels[idx], self.cfg, sample_indices=idx)
        return Dataset(features=X, labels=self.base.labels[idx], name=self.name)

    def __len__(self) -> int:
        return len(self.base)


def adversarial_constraint(base: Dataset, loss: LossSpec, threshold_c: float,
                           cfg: AttackConfig, name: str = "") -> ConstraintSpec:
    """Constraint whose risk is measured on perturbations of `base` generated
    against whatever model is being evaluated. With epsilon=0 the realized
    set equals `base` exactly."""
    if cfg.epsilon == 0.0:
        return ConstraintSpec(loss=loss, threshold_c=threshold_c, dataset=base,
                              name=name or f"{base.name}@adversarial")
    return ConstraintSpec(loss=loss, threshold_c=threshold_c,
                          dataset=AdversarialDataset(base, loss, cfg),
                          name=name or f"{base.name}@adversarial")

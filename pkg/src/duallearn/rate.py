"""Rate (probability) constraints and their smooth sigmoid surrogates.

A rate constraint bounds the frequency of a thresholded event of the model
output. The indicator making up that frequency has no usable gradient, so
primal steps minimize a Lagrangian in which the indicator is swapped for a
steep sigmoid; dual updates keep using the true indicator slacks, so
feasibility is always measured against the actual rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    ConstraintSpec,
    LossSpec,
    Problem,
    ReferenceTerm,
    resolve_dataset,
    stable_sigmoid,
)
from .errors import ConfigurationError, InputError
from .lagrangian import DualState
from .models import ModelState, predict_batch


@dataclass(frozen=True)
class SurrogateConfig:
    """Sigmoid replacement for an indicator: slope, decision shift, and
    whether the primal step should use it at all."""

    slope_a: float = 8.0
    shift: float = 0.5
    enabled_in_primal: bool = True

    def __post_init__(self) -> None:
        if self.slope_a < 1.0:
            raise ConfigurationError(f"surrogate slope must be >= 1, got {self.slope_a}")
        if not math.isfinite(self.shift):
            raise ConfigurationError("surrogate shift must be finite")


@dataclass(frozen=True)
class MarginReport:
    """Smallest |prediction - shift| seen across rate-constraint samples,
    plus the samples falling under the requested margin."""

    min_abs_margin_tau: float
    violating_sample_indices: tuple[tuple[int, str, int], ...]

    def __post_init__(self) -> None:
        if self.min_abs_margin_tau < 0:
            raise InputError("margin must be nonnegative")


def indicator_rate_loss(g_value: float) -> float:
    """1 if the event fires (g >= 0, boundary included), else 0."""
    if not math.isfinite(g_value):
        raise InputError(f"indicator input must be finite, got {g_value}")
    return 1.0 if g_value >= 0.0 else 0.0


def sigmoid_surrogate(x: float, a: float) -> float:
    """1 / (1 + exp(-a x)), strictly inside (0, 1) and increasing in x."""
    if a < 1.0:
        raise ConfigurationError(f"sigmoid slope must be >= 1, got {a}")
    return float(stable_sigmoid(a * float(x)))


def _is_rate(loss: LossSpec) -> bool:
    return loss.kind in ("rate-indicator", "rate-sigmoid")


def _surrogate_loss(loss: LossSpec, cfg: SurrogateConfig) -> LossSpec:
    return LossSpec(kind="rate-sigmoid", bound_B=loss.bound_B,
                    lipschitz_M=loss.lipschitz_M, rate_shift=cfg.shift,
                    rate_slope=cfg.slope_a)


def build_surrogate_lagrangian(problem: Problem) -> Problem:
    """Problem with rate-indicator constraint losses swapped for sigmoids.

    Thresholds, datasets, and reference structure are untouched; the result
    is meant for the primal step only, while slack evaluation stays on the
    original problem. Problems without rate constraints pass through
    unchanged.
    """
    if not any(c.loss.kind == "rate-indicator" or
               (c.reference is not None and c.reference.loss.kind == "rate-indicator")
               for c in problem.constraints):
        return problem
    new_constraints = []
    for i, c in enumerate(problem.constraints):
        if c.loss.kind != "rate-indicator" and (
                c.reference is None or c.reference.loss.kind != "rate-indicator"):
            new_constraints.append(c)
            continue
        if c.surrogate is None:
            raise ConfigurationError(
                f"constraint {i} ({c.name or 'unnamed'}) has a rate-indicator loss "
                "but no surrogate configuration"
            )
        if not c.surrogate.enabled_in_primal:
            new_constraints.append(c)
            continue
        loss = _surrogate_loss(c.loss, c.surrogate) if c.loss.kind == "rate-indicator" else c.loss
        reference = c.reference
        if reference is not None and reference.loss.kind == "rate-indicator":
            reference = ReferenceTerm(loss=_surrogate_loss(reference.loss, c.surrogate),
                                      dataset=reference.dataset)
        new_constraints.append(replace(c, loss=loss, reference=reference))
    return replace(problem, constraints=tuple(new_constraints))


def surrogate_gap_bound(mu: DualState, tau: float, a: float) -> float:
    """2 ||mu||_1 (1 - sigmoid(a tau)): how far the surrogate minimizer can sit
    above the true indicator-Lagrangian minimum when every sample clears the
    margin tau."""
    if tau < 0:
        raise InputError(f"tau must be >= 0, got {tau}")
    l1 = float(np.abs(mu.mu).sum())
    return 2.0 * l1 * (1.0 - sigmoid_surrogate(tau, a))


def margin_check(model: ModelState, problem: Problem, tau_min: float = 0.0) -> MarginReport:
    """Scan rate-constraint samples for |prediction - shift| margins.

    Reference datasets attached to rate constraints are scanned too, since
    their indicators enter the same Lagrangian. Violations are reported as
    (constraint index, "dataset" | "reference", sample index).
    """
    if tau_min < 0:
        raise InputError("tau_min must be >= 0")
    scanned = False
    min_margin = math.inf
    violations: list[tuple[int, str, int]] = []
    for i, c in enumerate(problem.constraints):
        parts = []
        if _is_rate(c.loss):
            parts.append(("dataset", c.loss, c.dataset))
        if c.reference is not None and _is_rate(c.reference.loss):
            parts.append(("reference", c.reference.loss, c.reference.dataset))
        for part, loss, ds_like in parts:
            scanned = True
            ds = resolve_dataset(ds_like, model)
            margins = np.abs(predict_batch(model, ds.features)[:, 0] - loss.rate_shift)
            min_margin = min(min_margin, float(margins.min()))
            for n in np.nonzero(margins < tau_min)[0]:
                violations.append((i, part, int(n)))
    if not scanned:
        raise InputError("problem has no rate constraints to margin-check")
    return MarginReport(min_abs_margin_tau=min_margin,
                        violating_sample_indices=tuple(violations))

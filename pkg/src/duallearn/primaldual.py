"""Projected dual ascent over the empirical Lagrangian.

`train` is the reference loop: per iteration it (approximately) minimizes
the Lagrangian at the current multipliers, evaluates constraint slacks at
the minimizer, and takes a projected ascent step on the multipliers, which
start at zero and stay nonnegative throughout. `train_alternating` is the
cheaper variant that replaces the inner minimization by a single warm-started
epoch per dual update. Traces record every iterate so that the uniform
mixture over them (the randomized solution) can be evaluated afterwards.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core import Dataset, Problem, empirical_risk
from .errors import ConfigurationError, DualLearnError, InputError
from .lagrangian import DualState, InnerSolverConfig, dual_function, enumeration_stats, slacks
from .models import Arch, ModelState, arch_from_dict, arch_to_dict, load_model, save_model

# Full per-iteration snapshots above this parameter count require an explicit
# snapshot_stride; strided traces cannot back a randomized solution.
SNAPSHOT_PARAM_LIMIT = 100_000


@dataclass(frozen=True)
class TrainConfig:
    """Iteration budget, dual step rule, and inner solver for one run."""

    iterations_T: int
    dual_step_eta: float
    inner: InnerSolverConfig
    dual_method: str = "projected-ascent"
    dual_adam_step: float | None = None
    seed: int = 0
    snapshot_stride: int = 1

    def __post_init__(self) -> None:
        if self.iterations_T < 1:
            raise ConfigurationError("iterations_T must be >= 1")
        if not (math.isfinite(self.dual_step_eta) and self.dual_step_eta > 0):
            raise ConfigurationError("dual_step_eta must be positive")
        if self.dual_method not in ("projected-ascent", "projected-adam"):
            raise ConfigurationError(f"unknown dual method {self.dual_method!r}")
        if self.dual_adam_step is not None and self.dual_adam_step <= 0:
            raise ConfigurationError("dual_adam_step must be positive when given")
        if self.snapshot_stride < 1:
            raise ConfigurationError("snapshot_stride must be >= 1")


@dataclass(frozen=True)
class TraceRecord:
    """State observed at one iteration, with mu taken before its update."""

    t: int
    theta: np.ndarray | None
    objective: float
    slacks: np.ndarray
    mu: np.ndarray
    lagrangian: float


@dataclass(frozen=True)
class TrainTrace:
    """Per-iteration records of a completed run plus the model architecture."""

    records: tuple[TraceRecord, ...]
    arch: Arch

    def __len__(self) -> int:
        return len(self.records)

    def mu_matrix(self) -> np.ndarray:
        return np.stack([r.mu for r in self.records])

    def slack_matrix(self) -> np.ndarray:
        return np.stack([r.slacks for r in self.records])

    def lagrangians(self) -> np.ndarray:
        return np.asarray([r.lagrangian for r in self.records])

    def objectives(self) -> np.ndarray:
        return np.asarray([r.objective for r in self.records])


@dataclass(frozen=True)
class RandomizedSolution:
    """Uniform mixture over the primal iterates of a trace."""

    models: tuple[ModelState, ...]

    def __post_init__(self) -> None:
        if len(self.models) == 0:
            raise InputError("randomized solution needs a nonempty support")


def dual_update(dual: DualState, slack: np.ndarray, eta: float) -> DualState:
    """Projected ascent step mu_i <- max(0, mu_i + eta * s_i)."""
    s = np.asarray(slack, dtype=float)
    if s.shape != dual.mu.shape:
        raise InputError(f"slack shape {s.shape} does not match mu shape {dual.mu.shape}")
    if eta <= 0:
        raise InputError("eta must be positive")
    return DualState(np.maximum(0.0, dual.mu + eta * s))


class _DualAdam:
    """ADAM ascent on mu with the nonnegativity projection applied after each step."""

    def __init__(self, m: int, step: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps_hat: float = 1e-8) -> None:
        self.step = step
        self.beta1, self.beta2, self.eps_hat = beta1, beta2, eps_hat
        self.m1 = np.zeros(m)
        self.m2 = np.zeros(m)
        self.t = 0

    def update(self, dual: DualState, slack: np.ndarray) -> DualState:
        self.t += 1
        self.m1 = self.beta1 * self.m1 + (1.0 - self.beta1) * slack
        self.m2 = self.beta2 * self.m2 + (1.0 - self.beta2) * slack * slack
        m_hat = self.m1 / (1.0 - self.beta1 ** self.t)
        v_hat = self.m2 / (1.0 - self.beta2 ** self.t)
        return DualState(np.maximum(0.0, dual.mu + self.step * m_hat / (np.sqrt(v_hat) + self.eps_hat)))


def _is_static(problem: Problem) -> bool:
    if not isinstance(problem.objective_dataset, Dataset):
        return False
    for c in problem.constraints:
        if not isinstance(c.dataset, Dataset):
            return False
        if c.reference is not None and not isinstance(c.reference.dataset, Dataset):
            return False
    return True


def train(problem: Problem, config: TrainConfig, init: ModelState,
          primal_problem: Problem | None = None):
    """Run projected dual ascent and return (trace, final model, final multipliers).

    `primal_problem`, when given, is what the inner solver minimizes (e.g. a
    sigmoid-surrogate substitution of `problem`); slack evaluation and the
    recorded Lagrangian always use the original `problem`, so dual updates
    see the true constraint values. Deterministic for a fixed config seed.
    """
    if primal_problem is None:
        primal_problem = problem
    if primal_problem.m != problem.m:
        raise InputError("primal problem must have the same constraint count")
    n_params = init.arch.n_params
    if n_params > SNAPSHOT_PARAM_LIMIT and config.snapshot_stride == 1:
        raise ConfigurationError(
            f"models above {SNAPSHOT_PARAM_LIMIT} parameters need an explicit snapshot_stride"
        )

    inner = config.inner
    enum_fast = (inner.method == "enumeration" and _is_static(primal_problem)
                 and _is_static(problem))
    if enum_fast:
        R_p, S_p = enumeration_stats(primal_problem, inner.candidates)
        if primal_problem is problem:
            R_o, S_o = R_p, S_p
        else:
            R_o, S_o = enumeration_stats(problem, inner.candidates)

    seeds = np.random.SeedSequence(config.seed % (2 ** 63)).spawn(config.iterations_T)
    mu = DualState.zeros(problem.m)
    adam = (_DualAdam(problem.m, config.dual_adam_step or config.dual_step_eta)
            if config.dual_method == "projected-adam" else None)
    model = init
    records: list[TraceRecord] = []

    for t in range(config.iterations_T):
        try:
            if enum_fast:
                vals = R_p + S_p @ mu.mu if problem.m else R_p
                j = int(np.argmin(vals))
                model_t = inner.candidates[j]
                s = S_o[j].copy()
                obj = float(R_o[j])
            else:
                start = model if (inner.warm_start and t > 0) else init
                _, model_t = dual_function(mu, primal_problem, inner, start,
                                           rng=np.random.default_rng(seeds[t]))
                s = slacks(model_t, problem)
                obj = empirical_risk(model_t, problem.objective_loss, problem.objective_dataset)
        except DualLearnError as err:
            raise type(err)(f"iteration {t}: {err}") from err
        lag = obj + float(mu.mu @ s) if problem.m else obj
        theta = model_t.params.copy() if t % config.snapshot_stride == 0 else None
        records.append(TraceRecord(t=t, theta=theta, objective=obj,
                                   slacks=np.asarray(s, dtype=float), mu=mu.mu.copy(),
                                   lagrangian=lag))
        if problem.m:
            mu = adam.update(mu, s) if adam is not None else dual_update(mu, s, config.dual_step_eta)
        model = model_t

    return TrainTrace(records=tuple(records), arch=init.arch), model, mu


def train_alternating(problem: Problem, config: TrainConfig, init: ModelState,
                      primal_problem: Problem | None = None):
    """Alternating variant: one warm-started primal epoch per dual update."""
    inner = config.inner
    if inner.method == "gradient":
        inner = replace(inner, epochs=1, warm_start=True)
    return train(problem, replace(config, inner=inner), init, primal_problem)


def randomized_solution(trace: TrainTrace) -> RandomizedSolution:
    """Uniform mixture over all recorded iterates; refuses strided traces."""
    if len(trace) == 0:
        raise InputError("cannot build a randomized solution from an empty trace")
    models = []
    for r in trace.records:
        if r.theta is None:
            raise InputError(
                "trace has strided snapshots; a randomized solution needs every iterate"
            )
        models.append(ModelState(params=r.theta, arch=trace.arch))
    return RandomizedSolution(models=tuple(models))


def evaluate_randomized(sol: RandomizedSolution, loss, dataset) -> float:
    """Risk of the uniform mixture: the average of per-iterate empirical risks."""
    risks = [empirical_risk(m, loss, dataset) for m in sol.models]
    return float(np.asarray(risks).sum()) / len(risks)


def ergodic_complementary_slackness(trace: TrainTrace) -> float:
    """(1/T) sum_t mu(t) . s(t) over a completed trace.

    For projected-ascent runs this is bounded below by -eta * m * B^2 / 2;
    the ADAM dual variant has no fixed eta, so the quantity is reported as a
    diagnostic only.
    """
    if len(trace) == 0:
        raise InputError("empty trace")
    total = sum(float(r.mu @ r.slacks) for r in trace.records)
    return total / len(trace)


def ergodic_slacks(trace: TrainTrace) -> np.ndarray:
    """Per-constraint mean slack over the trace (the randomized-solution slack)."""
    if len(trace) == 0:
        raise InputError("empty trace")
    return trace.slack_matrix().mean(axis=0)


def recommend_hyperparams(B: float, m: int, zeta_bar: float, U0: float,
                          M: float, nu: float) -> tuple[float, int]:
    """Dual step size and iteration budget from the ascent analysis.

    eta = 2 * zeta_bar / (m * B^2) targets a dual solve accurate to the
    statistical error; T = ceil(U0 / (2 * eta * M * nu)) + 1 iterations reach
    it, where U0 bounds the squared distance from zero to the optimal
    multiplier set (B/xi gives a conservative surrogate for its norm when it
    is not observable).
    """
    if m == 0:
        raise ConfigurationError("hyperparameter prescription is undefined for m = 0")
    for name, val in (("B", B), ("zeta_bar", zeta_bar), ("U0", U0), ("M", M), ("nu", nu)):
        if not (math.isfinite(val) and val > 0):
            raise InputError(f"{name} must be positive and finite, got {val}")
    eta = 2.0 * zeta_bar / (m * B * B)
    T = math.ceil(U0 / (2.0 * eta * M * nu)) + 1
    return eta, T


# --- trace serialization -----------------------------------------------------

_TRACE_KIND = "duallearn-trace"


def save_trace(trace: TrainTrace, records_path: str | Path,
               theta_dir: str | Path | None = None) -> None:
    """Write one JSON object per iteration; snapshots go to sidecar model files.

    With theta_dir=None the snapshots are dropped (records only), which is
    enough for slack/multiplier diagnostics but not for randomized solutions.
    """
    records_path = Path(records_path)
    lines = [json.dumps({"kind": _TRACE_KIND, "version": 1,
                         "arch": arch_to_dict(trace.arch)}, sort_keys=True)]
    for r in trace.records:
        theta_path = None
        if theta_dir is not None and r.theta is not None:
            theta_dir = Path(theta_dir)
            theta_dir.mkdir(parents=True, exist_ok=True)
            fname = f"theta_{r.t:06d}.txt"
            save_model(ModelState(params=r.theta, arch=trace.arch), theta_dir / fname)
            theta_path = str((theta_dir / fname).relative_to(records_path.parent)
                             if theta_dir.is_relative_to(records_path.parent)
                             else theta_dir / fname)
        lines.append(json.dumps({
            "t": r.t,
            "objective": r.objective,
            "slacks": [float(v) for v in r.slacks],
            "mu": [float(v) for v in r.mu],
            "lagrangian": r.lagrangian,
            "theta_path": theta_path,
        }, sort_keys=True))
    records_path.write_text("\n".join(lines) + "\n")


def load_trace(records_path: str | Path) -> TrainTrace:
    records_path = Path(records_path)
    lines = records_path.read_text().splitlines()
    if not lines:
        raise InputError(f"{records_path}: empty trace file")
    header = json.loads(lines[0])
    if header.get("kind") != _TRACE_KIND:
        raise InputError(f"{records_path}: not a duallearn trace file")
    arch = arch_from_dict(header["arch"])
    records = []
    for line in lines[1:]:
        obj = json.loads(line)
        theta = None
        if obj.get("theta_path"):
            theta = load_model(records_path.parent / obj["theta_path"]).params
        records.append(TraceRecord(
            t=int(obj["t"]), theta=theta, objective=float(obj["objective"]),
            slacks=np.asarray(obj["slacks"], dtype=float),
            mu=np.asarray(obj["mu"], dtype=float),
            lagrangian=float(obj["lagrangian"]),
        ))
    return TrainTrace(records=tuple(records), arch=arch)

"""Differentiable predictors with exact handwritten gradients.

Three architectures: linear maps, logistic regression, and small MLPs with
tanh (default) or relu hidden units and an optional sigmoid output. No
autodiff framework is used anywhere -- the parameter and input gradients
below are written out per architecture and validated against central finite
differences in the test suite.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import Dataset, DatasetLike, LossSpec, loss_pred_grads, resolve_dataset, stable_sigmoid
from .errors import ConfigurationError, InputError, NumericError


@dataclass(frozen=True)
class LinearArch:
    """y = W x (+ b), mapping in_dim -> out_dim."""

    in_dim: int
    out_dim: int = 1
    bias: bool = True

    kind = "linear"

    def __post_init__(self) -> None:
        if self.in_dim < 1 or self.out_dim < 1:
            raise ConfigurationError("linear dimensions must be >= 1")

    @property
    def n_params(self) -> int:
        return self.out_dim * self.in_dim + (self.out_dim if self.bias else 0)

    @property
    def n_outputs(self) -> int:
        return self.out_dim


@dataclass(frozen=True)
class LogisticArch:
    """p = sigmoid(w . x + b), a scalar probability in (0, 1)."""

    in_dim: int

    kind = "logistic"

    def __post_init__(self) -> None:
        if self.in_dim < 1:
            raise ConfigurationError("logistic in_dim must be >= 1")

    @property
    def n_params(self) -> int:
        return self.in_dim + 1

    @property
    def n_outputs(self) -> int:
        return 1


@dataclass(frozen=True)
class MlpArch:
    """Fully connected layers `widths[0] -> ... -> widths[-1]`.

    Hidden activations are tanh by default (relu available); the output is
    linear unless `output="sigmoid"`, which squashes to (0, 1) for
    probability-valued models.
    """

    widths: tuple[int, ...]
    activation: str = "tanh"
    output: str = "linear"

    kind = "mlp"

    def __post_init__(self) -> None:
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if len(self.widths) < 2 or any(w < 1 for w in self.widths):
            raise ConfigurationError(f"mlp widths must be >= 2 positive layers, got {self.widths}")
        if self.activation not in ("tanh", "relu"):
            raise ConfigurationError(f"unknown activation {self.activation!r}")
        if self.output not in ("linear", "sigmoid"):
            raise ConfigurationError(f"unknown output mode {self.output!r}")

    @property
    def n_params(self) -> int:
        return sum(o * i + o for i, o in zip(self.widths[:-1], self.widths[1:]))

    @property
    def n_outputs(self) -> int:
        return self.widths[-1]


Arch = LinearArch | LogisticArch | MlpArch


@dataclass(frozen=True)
class ModelState:
    """A flat parameter vector tied to its architecture descriptor."""

    params: np.ndarray
    arch: Arch

    def __post_init__(self) -> None:
        p = np.asarray(self.params, dtype=float)
        if p.ndim != 1:
            raise InputError(f"params must be a flat vector, got shape {p.shape}")
        if p.shape[0] != self.arch.n_params:
            raise InputError(
                f"architecture expects {self.arch.n_params} parameters, got {p.shape[0]}"
            )
        if not np.all(np.isfinite(p)):
            raise InputError("model parameters must be finite")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "params", p)

    @property
    def in_dim(self) -> int:
        if isinstance(self.arch, MlpArch):
            return self.arch.widths[0]
        return self.arch.in_dim

    def with_params(self, params: np.ndarray) -> ModelState:
        return ModelState(params=params, arch=self.arch)


def init_model(arch: Arch, seed: int = 0) -> ModelState:
    """Deterministic initial state: zeros for linear/logistic, seeded
    Glorot-uniform weights (zero biases) for MLPs."""
    if not isinstance(arch, MlpArch):
        return ModelState(np.zeros(arch.n_params), arch)
    rng = np.random.default_rng(seed)
    chunks: list[np.ndarray] = []
    for fan_in, fan_out in zip(arch.widths[:-1], arch.widths[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        chunks.append(rng.uniform(-limit, limit, size=fan_out * fan_in))
        chunks.append(np.zeros(fan_out))
    return ModelState(np.concatenate(chunks), arch)


def _unpack_linear(model: ModelState) -> tuple[np.ndarray, np.ndarray]:
    arch = model.arch
    w_end = arch.out_dim * arch.in_dim
    W = model.params[:w_end].reshape(arch.out_dim, arch.in_dim)
    b = model.params[w_end:] if arch.bias else np.zeros(arch.out_dim)
    return W, b


def _unpack_mlp(model: ModelState) -> list[tuple[np.ndarray, np.ndarray]]:
    arch = model.arch
    layers = []
    pos = 0
    for fan_in, fan_out in zip(arch.widths[:-1], arch.widths[1:]):
        W = model.params[pos : pos + fan_out * fan_in].reshape(fan_out, fan_in)
        pos += fan_out * fan_in
        b = model.params[pos : pos + fan_out]
        pos += fan_out
        layers.append((W, b))
    return layers


def _mlp_forward(model: ModelState, X: np.ndarray):
    """Forward pass caching layer inputs and pre-activations for backprop."""
    arch = model.arch
    layers = _unpack_mlp(model)
    acts = [X]
    pres = []
    h = X
    for li, (W, b) in enumerate(layers):
        z = h @ W.T + b
        pres.append(z)
        if li < len(layers) - 1:
            h = np.tanh(z) if arch.activation == "tanh" else np.maximum(z, 0.0)
        else:
            h = stable_sigmoid(z) if arch.output == "sigmoid" else z
        acts.append(h)
    return layers, acts, pres


def predict_batch(model: ModelState, X: np.ndarray) -> np.ndarray:
    """Model outputs for an (N, d) feature matrix, as an (N, k) matrix."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.in_dim:
        raise InputError(
            f"features must be (N, {model.in_dim}), got shape {X.shape}"
        )
    arch = model.arch
    if isinstance(arch, LinearArch):
        W, b = _unpack_linear(model)
        return X @ W.T + b
    if isinstance(arch, LogisticArch):
        w = model.params[:-1]
        b = model.params[-1]
        return stable_sigmoid(X @ w + b)[:, None]
    _, acts, _ = _mlp_forward(model, X)
    return acts[-1]


def predict(model: ModelState, features: np.ndarray | Sequence[float]) -> np.ndarray:
    """Model output for a single feature vector."""
    x = np.asarray(features, dtype=float)
    if x.ndim != 1:
        raise InputError(f"features must be a vector, got shape {x.shape}")
    return predict_batch(model, x[None, :])[0]


def _mlp_hidden_grad(arch: MlpArch, z: np.ndarray) -> np.ndarray:
    if arch.activation == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    return (z > 0.0).astype(float)


def _backprop(model: ModelState, X: np.ndarray, G: np.ndarray,
              want_params: bool, want_inputs: bool):
    """Chain an upstream d(total)/d(output) matrix G back through the model.

    Returns (param_grad or None, input_grads or None). G rows are per-sample
    gradients w.r.t. the model output (after any output squashing).
    """
    arch = model.arch
    dparams = None
    dX = None
    if isinstance(arch, LinearArch):
        W, _ = _unpack_linear(model)
        if want_params:
            dW = G.T @ X
            parts = [dW.ravel()]
            if arch.bias:
                parts.append(G.sum(axis=0))
            dparams = np.concatenate(parts)
        if want_inputs:
            dX = G @ W
    elif isinstance(arch, LogisticArch):
        w = model.params[:-1]
        p = stable_sigmoid(X @ w + model.params[-1])
        ds = G[:, 0] * p * (1.0 - p)
        if want_params:
            dparams = np.concatenate([ds @ X, [ds.sum()]])
        if want_inputs:
            dX = ds[:, None] * w[None, :]
    else:
        layers, acts, pres = _mlp_forward(model, X)
        if arch.output == "sigmoid":
            p = acts[-1]
            delta = G * p * (1.0 - p)
        else:
            delta = G
        chunks: list[np.ndarray] = []
        for li in range(len(layers) - 1, -1, -1):
            W, _ = layers[li]
            if want_params:
                chunks.append(delta.sum(axis=0))
                chunks.append((delta.T @ acts[li]).ravel())
            delta = delta @ W
            if li > 0:
                delta = delta * _mlp_hidden_grad(arch, pres[li - 1])
        if want_params:
            dparams = np.concatenate(chunks[::-1])
        if want_inputs:
            dX = delta
    return dparams, dX


WeightedLoss = tuple[float, LossSpec, DatasetLike]


def grad_params(model: ModelState, weighted_losses: Sequence[WeightedLoss]) -> np.ndarray:
    """Exact gradient of sum_j weight_j * empirical_risk(model, loss_j, batch_j).

    Zero-weight terms are skipped outright, so they neither trigger
    surrogate-required errors nor realise model-dependent datasets.
    """
    total = np.zeros(model.arch.n_params)
    for weight, loss, dataset in weighted_losses:
        if not math.isfinite(weight):
            raise InputError(f"loss weight must be finite, got {weight}")
        if weight == 0.0:
            continue
        ds = resolve_dataset(dataset, model)
        X, Y = ds.features, ds.labels
        P = predict_batch(model, X)
        G = loss_pred_grads(loss, P, Y) / len(ds)
        dparams, _ = _backprop(model, X, G, want_params=True, want_inputs=False)
        total += weight * dparams
    return total


def grad_input_batch(model: ModelState, loss: LossSpec, X: np.ndarray,
                     labels: np.ndarray) -> np.ndarray:
    """Per-sample gradients of the loss w.r.t. the inputs, as an (N, d) matrix."""
    X = np.asarray(X, dtype=float)
    P = predict_batch(model, X)
    G = loss_pred_grads(loss, P, np.asarray(labels))
    _, dX = _backprop(model, X, G, want_params=False, want_inputs=True)
    return dX


def grad_input(model: ModelState, loss: LossSpec, sample) -> np.ndarray:
    """Exact gradient of eval_loss(loss, predict(model, x), y) w.r.t. x."""
    return grad_input_batch(model, loss, sample.features[None, :],
                            np.asarray([sample.label]))[0]


@dataclass(frozen=True)
class OptimizerState:
    """SGD or ADAM state; `step` returns fresh states, nothing is mutated.

    ADAM uses the standard defaults beta1=0.9, beta2=0.999, eps=1e-8 with
    bias-corrected moments and the epsilon added outside the square root.
    """

    method: str
    step_size: float
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8

    def __post_init__(self) -> None:
        if self.method not in ("sgd", "adam"):
            raise ConfigurationError(f"unknown optimizer {self.method!r}")
        if not (math.isfinite(self.step_size) and self.step_size > 0):
            raise ConfigurationError(f"step_size must be positive, got {self.step_size}")
        if self.t < 0:
            raise ConfigurationError("step counter must be >= 0")


def optimizer_step(opt: OptimizerState, model: ModelState,
                   gradient: np.ndarray) -> tuple[OptimizerState, ModelState]:
    """One descent step; raises NumericError on non-finite gradients,
    leaving both states untouched."""
    g = np.asarray(gradient, dtype=float)
    if g.shape != model.params.shape:
        raise InputError(
            f"gradient length {g.shape} does not match {model.params.shape} parameters"
        )
    if not np.all(np.isfinite(g)):
        raise NumericError("gradient contains non-finite entries; step refused")
    if opt.method == "sgd":
        new_model = model.with_params(model.params - opt.step_size * g)
        return replace(opt, t=opt.t + 1), new_model
    m = opt.m if opt.m is not None else np.zeros_like(g)
    v = opt.v if opt.v is not None else np.zeros_like(g)
    if m.shape != g.shape or v.shape != g.shape:
        raise InputError("optimizer moment vectors do not match the parameter length")
    t = opt.t + 1
    m = opt.beta1 * m + (1.0 - opt.beta1) * g
    v = opt.beta2 * v + (1.0 - opt.beta2) * g * g
    m_hat = m / (1.0 - opt.beta1 ** t)
    v_hat = v / (1.0 - opt.beta2 ** t)
    step = opt.step_size * m_hat / (np.sqrt(v_hat) + opt.eps_hat)
    new_model = model.with_params(model.params - step)
    return replace(opt, m=m, v=v, t=t), new_model


# --- serialization -----------------------------------------------------------

_MODEL_HEADER = "duallearn-model 1"


def arch_to_dict(arch: Arch) -> dict:
    if isinstance(arch, LinearArch):
        return {"kind": "linear", "in_dim": arch.in_dim, "out_dim": arch.out_dim,
                "bias": arch.bias}
    if isinstance(arch, LogisticArch):
        return {"kind": "logistic", "in_dim": arch.in_dim}
    return {"kind": "mlp", "widths": list(arch.widths), "activation": arch.activation,
            "output": arch.output}


def arch_from_dict(spec: dict) -> Arch:
    kind = spec.get("kind")
    if kind == "linear":
        return LinearArch(in_dim=spec["in_dim"], out_dim=spec.get("out_dim", 1),
                          bias=spec.get("bias", True))
    if kind == "logistic":
        return LogisticArch(in_dim=spec["in_dim"])
    if kind == "mlp":
        return MlpArch(widths=tuple(spec["widths"]),
                       activation=spec.get("activation", "tanh"),
                       output=spec.get("output", "linear"))
    raise ConfigurationError(f"unknown architecture kind {kind!r}")


def save_model(model: ModelState, path: str | Path) -> None:
    """Versioned text format: header, arch descriptor, one parameter per line."""
    lines = [_MODEL_HEADER, json.dumps(arch_to_dict(model.arch), sort_keys=True)]
    lines.extend(repr(float(p)) for p in model.params)
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path: str | Path) -> ModelState:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != _MODEL_HEADER:
        raise InputError(f"{path}: not a duallearn model file")
    arch = arch_from_dict(json.loads(lines[1]))
    params = np.asarray([float(s) for s in lines[2:] if s.strip()], dtype=float)
    return ModelState(params=params, arch=arch)

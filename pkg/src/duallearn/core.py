"""Domain types and bounded-loss evaluation.

Everything downstream (Lagrangians, attacks, rate surrogates, oracles) is
built on four value types -- Sample, Dataset, LossSpec, ConstraintSpec --
plus the Problem container and two operations: per-sample loss evaluation
and empirical (sample-average) risk. All types are immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING, Iterator, Sequence, Union

import numpy as np

from .errors import ConfigurationError, InputError, SurrogateRequiredError

if TYPE_CHECKING:  # pragma: no cover
    from .rate import SurrogateConfig


LOSS_KINDS = (
    "zero-one",
    "clamped-cross-entropy",
    "squared",
    "hinge",
    "absolute",
    "signed-score",
    "rate-indicator",
    "rate-sigmoid",
)

# Kinds with a usable gradient w.r.t. the prediction. zero-one and
# rate-indicator are piecewise constant and require a surrogate.
DIFFERENTIABLE_KINDS = (
    "clamped-cross-entropy",
    "squared",
    "hinge",
    "absolute",
    "signed-score",
    "rate-sigmoid",
)


def stable_sigmoid(x: np.ndarray | float) -> np.ndarray | float:
    """Numerically stable logistic function, exact at large |x|."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    if out.ndim == 0:
        return float(out)
    return out


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Sample:
    """One (features, label) pair. Labels are class indices or real scalars."""

    features: np.ndarray
    label: int | float

    def __post_init__(self) -> None:
        feats = np.asarray(self.features, dtype=float)
        if feats.ndim != 1:
            raise InputError(f"sample features must be a vector, got shape {feats.shape}")
        if not np.all(np.isfinite(feats)):
            raise InputError("sample features must be finite")
        if not math.isfinite(float(self.label)):
            raise InputError("sample label must be finite")
        object.__setattr__(self, "features", _readonly(feats))


@dataclass(frozen=True)
class Dataset:
    """An ordered, nonempty collection of samples with a fixed feature dimension.

    Stored columnwise (an (N, d) feature matrix and an (N,) label vector) so
    that million-sample Monte-Carlo sets stay cheap; `samples` materialises
    Sample views on demand.
    """

    features: np.ndarray
    labels: np.ndarray
    name: str = "dataset"

    def __post_init__(self) -> None:
        feats = np.asarray(self.features, dtype=float)
        labels = np.asarray(self.labels)
        if labels.dtype.kind not in "iuf":
            raise InputError(f"labels must be numeric, got dtype {labels.dtype}")
        if labels.dtype.kind == "f":
            labels = labels.astype(float)
        else:
            labels = labels.astype(np.int64)
        if feats.ndim != 2:
            raise InputError(f"features must be an (N, d) matrix, got shape {feats.shape}")
        if feats.shape[0] == 0:
            raise InputError("dataset must be nonempty")
        if labels.shape != (feats.shape[0],):
            raise InputError(
                f"labels shape {labels.shape} does not match {feats.shape[0]} samples"
            )
        if not np.all(np.isfinite(feats)):
            raise InputError("dataset features must be finite")
        if not np.all(np.isfinite(labels.astype(float))):
            raise InputError("dataset labels must be finite")
        object.__setattr__(self, "features", _readonly(feats))
        object.__setattr__(self, "labels", _readonly(labels))

    @classmethod
    def from_samples(cls, samples: Sequence[Sample], name: str = "dataset") -> Dataset:
        if len(samples) == 0:
            raise InputError("dataset must be nonempty")
        dims = {s.features.shape[0] for s in samples}
        if len(dims) != 1:
            raise InputError(f"inhomogeneous feature dimensions in dataset: {sorted(dims)}")
        feats = np.stack([s.features for s in samples])
        labels = np.asarray([s.label for s in samples])
        return cls(features=feats, labels=labels, name=name)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def sample(self, i: int) -> Sample:
        label = self.labels[i]
        return Sample(self.features[i].copy(), label.item())

    @cached_property
    def samples(self) -> tuple[Sample, ...]:
        return tuple(self.sample(i) for i in range(len(self)))

    def __iter__(self) -> Iterator[Sample]:
        return (self.sample(i) for i in range(len(self)))

    def subset(self, indices: np.ndarray | Sequence[int], name: str | None = None) -> Dataset:
        idx = np.asarray(indices, dtype=int)
        return Dataset(
            features=self.features[idx],
            labels=self.labels[idx],
            name=name if name is not None else self.name,
        )


@dataclass(frozen=True)
class LossSpec:
    """A bounded loss function applied to (prediction, label) pairs.

    Kinds and their values on a prediction vector z with label y:

    - ``zero-one``: 1 if the predicted class differs from y. Vector
      predictions classify by argmax; scalar predictions are read as
      P(class 1) and thresholded at 0.5.
    - ``clamped-cross-entropy``: -log of the probability assigned to the
      true class, with probabilities clamped to [p_min, 1 - p_min] so the
      loss stays in [0, -log p_min]. Scalar predictions are P(class 1).
    - ``squared``: (z - y)^2, capped at bound_B.
    - ``hinge``: max(0, 1 - y z), capped at bound_B, with {0, 1} labels
      mapped to {-1, +1}.
    - ``absolute``: |y z|, capped at bound_B.
    - ``signed-score``: y z clipped to [-bound_B, bound_B]. The one signed
      kind; it encodes linear expectation constraints such as E[y z] <= c.
    - ``rate-indicator``: 1 if z - rate_shift >= 0 else 0 (the boundary
      counts as the event).
    - ``rate-sigmoid``: logistic(rate_slope * (z - rate_shift)), the smooth
      stand-in for rate-indicator used inside primal gradient steps.

    Where a cap is active the gradient is zero (the loss is flat there).
    """

    kind: str
    bound_B: float
    lipschitz_M: float | None = None
    clamp_p_min: float = 1e-6
    rate_shift: float = 0.5
    rate_slope: float = 8.0

    def __post_init__(self) -> None:
        if self.kind not in LOSS_KINDS:
            raise ConfigurationError(f"unknown loss kind {self.kind!r}")
        if not (math.isfinite(self.bound_B) and self.bound_B > 0):
            raise ConfigurationError(f"bound_B must be positive, got {self.bound_B}")
        if self.lipschitz_M is not None and self.lipschitz_M <= 0:
            raise ConfigurationError("lipschitz_M must be positive when given")
        if self.kind == "clamped-cross-entropy":
            if not (0.0 < self.clamp_p_min < 0.5):
                raise ConfigurationError("clamp_p_min must lie in (0, 1/2)")
            expected = -math.log(self.clamp_p_min)
            if not math.isclose(self.bound_B, expected, rel_tol=1e-9):
                raise ConfigurationError(
                    f"clamped-cross-entropy requires bound_B == -log(clamp_p_min) "
                    f"= {expected!r}, got {self.bound_B!r}"
                )
        if self.kind == "rate-sigmoid" and self.rate_slope < 1.0:
            raise ConfigurationError("rate-sigmoid slope must be >= 1")
        if self.kind in ("zero-one", "rate-indicator", "rate-sigmoid") and self.bound_B < 1.0:
            raise ConfigurationError(
                f"{self.kind} takes values up to 1, so bound_B must be >= 1, got {self.bound_B}"
            )

    @classmethod
    def cross_entropy(cls, clamp_p_min: float = 1e-6, lipschitz_M: float | None = None) -> LossSpec:
        return cls(
            kind="clamped-cross-entropy",
            bound_B=-math.log(clamp_p_min),
            lipschitz_M=lipschitz_M,
            clamp_p_min=clamp_p_min,
        )

    @property
    def differentiable(self) -> bool:
        return self.kind in DIFFERENTIABLE_KINDS

    @property
    def prediction_dim(self) -> int | None:
        """Required prediction dimension, or None when any dimension works."""
        if self.kind in ("zero-one", "clamped-cross-entropy"):
            return None
        return 1


class DatasetProvider:
    """A dataset that must be realised against the current model.

    Subclasses implement `realize`, regenerating the sample set every call;
    the adversarial-constraint provider lives in the robust module.
    """

    base: Dataset

    @property
    def name(self) -> str:
        return self.base.name

    @property
    def n_features(self) -> int:
        return self.base.n_features

    def realize(self, model) -> Dataset:  # pragma: no cover - interface
        raise NotImplementedError


DatasetLike = Union[Dataset, DatasetProvider]


def resolve_dataset(dataset: DatasetLike, model=None) -> Dataset:
    """Return the concrete Dataset, realising model-dependent providers."""
    if isinstance(dataset, Dataset):
        return dataset
    if model is None:
        raise InputError(
            f"dataset {dataset.name!r} depends on the model; a model is required to realise it"
        )
    return dataset.realize(model)


@dataclass(frozen=True)
class ReferenceTerm:
    """Optional subtracted risk for paired-expectation constraints.

    With a reference, a constraint reads
    risk(loss, dataset) - risk(reference.loss, reference.dataset) <= c,
    which is how group-rate-versus-overall-rate requirements are expressed.
    """

    loss: LossSpec
    dataset: DatasetLike


@dataclass(frozen=True)
class ConstraintSpec:
    """One expectation constraint: loss, threshold, and the dataset it averages over."""

    loss: LossSpec
    threshold_c: float
    dataset: DatasetLike
    surrogate: "SurrogateConfig | None" = None
    reference: ReferenceTerm | None = None
    name: str = ""

    def __post_init__(self) -> None:
        if not math.isfinite(self.threshold_c):
            raise InputError(f"constraint threshold must be finite, got {self.threshold_c}")


@dataclass(frozen=True)
class Problem:
    """Objective loss plus m >= 0 expectation constraints."""

    objective_loss: LossSpec
    objective_dataset: DatasetLike
    constraints: tuple[ConstraintSpec, ...] = field(default_factory=tuple)
    name: str = "problem"

    def __post_init__(self) -> None:
        object.__setattr__(self, "constraints", tuple(self.constraints))
        dims = {self.objective_dataset.n_features}
        for c in self.constraints:
            dims.add(c.dataset.n_features)
            if c.reference is not None:
                dims.add(c.reference.dataset.n_features)
        if len(dims) != 1:
            raise InputError(f"all problem datasets must share a feature dimension, got {sorted(dims)}")

    @property
    def m(self) -> int:
        return len(self.constraints)

    @property
    def n_features(self) -> int:
        return self.objective_dataset.n_features


def _pm_labels(labels: np.ndarray) -> np.ndarray:
    """Map {0, 1} class labels to {-1, +1}; leave anything else untouched."""
    vals = np.unique(labels)
    if np.all(np.isin(vals, (0, 1))):
        return 2.0 * labels.astype(float) - 1.0
    return labels.astype(float)


def _check_predictions(loss: LossSpec, predictions: np.ndarray) -> np.ndarray:
    p = np.asarray(predictions, dtype=float)
    if p.ndim != 2:
        raise InputError(f"predictions must be an (N, k) matrix, got shape {p.shape}")
    want = loss.prediction_dim
    if want is not None and p.shape[1] != want:
        raise InputError(
            f"loss kind {loss.kind!r} expects {want}-dimensional predictions, got {p.shape[1]}"
        )
    return p


def loss_values(loss: LossSpec, predictions: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-sample loss values for an (N, k) prediction matrix.

    Every kind except signed-score maps into [0, bound_B]; signed-score maps
    into [-bound_B, bound_B].
    """
    p = _check_predictions(loss, predictions)
    y = np.asarray(labels)
    n, k = p.shape
    if y.shape != (n,):
        raise InputError(f"labels shape {y.shape} does not match {n} predictions")
    B = loss.bound_B
    kind = loss.kind

    if kind == "zero-one":
        if k == 1:
            pred_class = (p[:, 0] >= 0.5).astype(float)
        else:
            pred_class = np.argmax(p, axis=1).astype(float)
        return (pred_class != y.astype(float)).astype(float)

    if kind == "clamped-cross-entropy":
        lo, hi = loss.clamp_p_min, 1.0 - loss.clamp_p_min
        if k == 1:
            yi = y.astype(float)
            if not np.all(np.isin(yi, (0.0, 1.0))):
                raise InputError("scalar cross-entropy predictions need {0, 1} labels")
            p_true = np.where(yi == 1.0, p[:, 0], 1.0 - p[:, 0])
        else:
            yi = y.astype(int)
            if np.any(yi < 0) or np.any(yi >= k):
                raise InputError(f"class labels must lie in [0, {k}) for {k}-way predictions")
            p_true = p[np.arange(n), yi]
        return -np.log(np.clip(p_true, lo, hi))

    z = p[:, 0]
    if kind == "squared":
        return np.minimum((z - y.astype(float)) ** 2, B)
    if kind == "hinge":
        ypm = _pm_labels(y)
        return np.minimum(np.maximum(0.0, 1.0 - ypm * z), B)
    if kind == "absolute":
        return np.minimum(np.abs(y.astype(float) * z), B)
    if kind == "signed-score":
        return np.clip(y.astype(float) * z, -B, B)
    if kind == "rate-indicator":
        return (z - loss.rate_shift >= 0.0).astype(float)
    if kind == "rate-sigmoid":
        return stable_sigmoid(loss.rate_slope * (z - loss.rate_shift))
    raise ConfigurationError(f"unknown loss kind {kind!r}")  # pragma: no cover


def loss_pred_grads(loss: LossSpec, predictions: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """d(loss)/d(prediction) per sample, zero wherever a cap or clamp is active."""
    if not loss.differentiable:
        raise SurrogateRequiredError(
            f"loss kind {loss.kind!r} has no gradient; substitute a surrogate first"
        )
    p = _check_predictions(loss, predictions)
    y = np.asarray(labels)
    n, k = p.shape
    B = loss.bound_B
    kind = loss.kind
    grads = np.zeros_like(p)

    if kind == "clamped-cross-entropy":
        lo, hi = loss.clamp_p_min, 1.0 - loss.clamp_p_min
        if k == 1:
            yi = y.astype(float)
            p_true = np.where(yi == 1.0, p[:, 0], 1.0 - p[:, 0])
            inside = (p_true >= lo) & (p_true <= hi)
            sign = np.where(yi == 1.0, 1.0, -1.0)
            grads[:, 0] = np.where(inside, -sign / np.where(inside, p_true, 1.0), 0.0)
        else:
            yi = y.astype(int)
            p_true = p[np.arange(n), yi]
            inside = (p_true >= lo) & (p_true <= hi)
            grads[np.arange(n), yi] = np.where(inside, -1.0 / np.where(inside, p_true, 1.0), 0.0)
        return grads

    z = p[:, 0]
    yf = y.astype(float)
    if kind == "squared":
        r = z - yf
        grads[:, 0] = np.where(r * r < B, 2.0 * r, 0.0)
    elif kind == "hinge":
        ypm = _pm_labels(y)
        h = 1.0 - ypm * z
        grads[:, 0] = np.where((h > 0.0) & (h < B), -ypm, 0.0)
    elif kind == "absolute":
        s = yf * z
        grads[:, 0] = np.where(np.abs(s) < B, yf * np.sign(s), 0.0)
    elif kind == "signed-score":
        grads[:, 0] = np.where(np.abs(yf * z) < B, yf, 0.0)
    elif kind == "rate-sigmoid":
        s = stable_sigmoid(loss.rate_slope * (z - loss.rate_shift))
        grads[:, 0] = loss.rate_slope * s * (1.0 - s)
    return grads


def eval_loss(loss: LossSpec, prediction: np.ndarray | Sequence[float], label: int | float) -> float:
    """Evaluate one loss on a single (prediction, label) pair."""
    p = np.atleast_1d(np.asarray(prediction, dtype=float))
    if p.ndim != 1:
        raise InputError(f"prediction must be a vector, got shape {p.shape}")
    return float(loss_values(loss, p[None, :], np.asarray([label]))[0])


def dataset_risk(loss: LossSpec, predictions: np.ndarray, labels: np.ndarray) -> float:
    """Mean loss over precomputed predictions, in deterministic reduction order."""
    vals = loss_values(loss, predictions, labels)
    return float(vals.sum()) / vals.shape[0]


def empirical_risk(model, loss: LossSpec, dataset: DatasetLike) -> float:
    """Sample-average loss of `model` on `dataset`.

    Model-dependent datasets (adversarial providers) are realised against
    `model` first, so the average is over the distribution the model itself
    induces.
    """
    from .models import predict_batch

    ds = resolve_dataset(dataset, model)
    if len(ds) == 0:  # unreachable given Dataset invariants; defensive
        raise InputError("cannot average over an empty dataset")
    preds = predict_batch(model, ds.features)
    return dataset_risk(loss, preds, ds.labels)

"""Shared builders for the test suite: the hand-solved convex toy and
random small enumerable instances."""

from __future__ import annotations

import numpy as np

from duallearn.core import ConstraintSpec, Dataset, LossSpec, Problem
from duallearn.models import LinearArch, ModelState
from duallearn.oracle import EnumerableProblem

TOY_BOUND = 4.0

# Hand-derived before implementation: objective (1/N) sum (theta - y_n)^2 over
# labels with mean 1.0, one constraint theta <= 0.5 via a unit-score dataset.
# Unconstrained argmin is theta = 1, so the constraint is active:
#   theta* = 0.5, mu* = 2 (1 - 0.5) = 1, P* = 0.25 + var(y).
TOY_LABELS = np.array([0.8, 1.2, 1.0, 1.0, 0.9, 1.1, 0.95, 1.05])
TOY_THRESHOLD = 0.5
TOY_ARCH = LinearArch(in_dim=1, out_dim=1, bias=False)


def toy_var() -> float:
    return float(((TOY_LABELS - 1.0) ** 2).mean())


def toy_analytic():
    """(theta*, mu*, P*) of the constrained least-squares toy."""
    return 0.5, 1.0, 0.25 + toy_var()


def convex_toy() -> Problem:
    obj_ds = Dataset(features=np.ones((len(TOY_LABELS), 1)), labels=TOY_LABELS,
                     name="toy-objective")
    con_ds = Dataset(features=np.ones((4, 1)), labels=np.ones(4, dtype=np.int64),
                     name="toy-constraint")
    return Problem(
        objective_loss=LossSpec(kind="squared", bound_B=TOY_BOUND),
        objective_dataset=obj_ds,
        constraints=(ConstraintSpec(
            loss=LossSpec(kind="signed-score", bound_B=TOY_BOUND),
            threshold_c=TOY_THRESHOLD, dataset=con_ds, name="score-cap"),),
        name="convex-toy",
    )


def toy_candidates(lo: float = -1.0, hi: float = 2.0, points: int = 601):
    grid = np.linspace(lo, hi, points)
    return tuple(ModelState(np.array([t]), TOY_ARCH) for t in grid)


def toy_feasible_model() -> ModelState:
    # strictly feasible: slack 0.3 - 0.5 = -0.2, so measured xi = 0.2
    return ModelState(np.array([0.3]), TOY_ARCH)


def random_enumerable(rng: np.random.Generator, n_candidates=None, m=None,
                      loss_pool=("absolute", "signed-score", "zero-one",
                                 "rate-indicator")) -> EnumerableProblem:
    """Random small instance: linear candidates, random datasets/thresholds."""
    d = int(rng.integers(1, 4))
    n_candidates = n_candidates or int(rng.integers(2, 6))
    m = m if m is not None else int(rng.integers(1, 4))
    arch = LinearArch(in_dim=d, out_dim=1, bias=False)
    B = 4.0

    def random_dataset(name):
        n = int(rng.integers(3, 9))
        X = rng.uniform(-1, 1, size=(n, d))
        y = rng.choice([-1, 1], size=n)
        return Dataset(features=X, labels=y, name=name)

    def random_loss():
        kind = str(rng.choice(list(loss_pool)))
        return LossSpec(kind=kind, bound_B=B if kind not in ("zero-one", "rate-indicator") else 1.0,
                        rate_shift=0.0)

    constraints = tuple(
        ConstraintSpec(loss=random_loss(),
                       threshold_c=float(rng.uniform(-0.5, 1.0)),
                       dataset=random_dataset(f"c{i}"), name=f"c{i}")
        for i in range(m)
    )
    problem = Problem(objective_loss=LossSpec(kind="absolute", bound_B=B),
                      objective_dataset=random_dataset("obj"),
                      constraints=constraints)
    candidates = tuple(ModelState(rng.uniform(-1.5, 1.5, size=d), arch)
                       for _ in range(n_candidates))
    return EnumerableProblem(problem=problem, candidates=candidates)

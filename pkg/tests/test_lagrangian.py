import numpy as np
import pytest

from duallearn.core import (
    ConstraintSpec,
    Dataset,
    LossSpec,
    Problem,
    empirical_risk,
    eval_loss,
)
from duallearn.errors import ConfigurationError, InputError, SurrogateRequiredError
from duallearn.lagrangian import (
    DualState,
    InnerSolverConfig,
    dual_function,
    empirical_lagrangian,
    slacks,
)
from duallearn.models import LinearArch, LogisticArch, ModelState, init_model, predict
from duallearn.oracle import ecrm_enumerate, example1_problem

from helpers import random_enumerable

ABS = LossSpec(kind="absolute", bound_B=4.0)
SCORE = LossSpec(kind="signed-score", bound_B=4.0)
IDENT = LinearArch(1, 1, bias=False)


def scalar_ds(values, labels=None, name="ds"):
    v = np.asarray(values, dtype=float)
    y = np.ones(len(v), dtype=np.int64) if labels is None else np.asarray(labels)
    return Dataset(features=v[:, None], labels=y, name=name)


def simple_problem():
    # identity model theta=1: objective risk 0.2, constraint risk 0.5
    return Problem(
        objective_loss=ABS,
        objective_dataset=scalar_ds([0.2], name="obj"),
        constraints=(ConstraintSpec(loss=ABS, threshold_c=0.2,
                                    dataset=scalar_ds([0.5], name="con")),),
    )


class TestEmpiricalLagrangian:
    def test_zero_multipliers_reduce_to_objective(self):
        prob = simple_problem()
        model = ModelState(np.array([1.0]), IDENT)
        obj = empirical_risk(model, prob.objective_loss, prob.objective_dataset)
        assert empirical_lagrangian(model, DualState.zeros(1), prob) == obj

    def test_substitution(self):
        # 0.2 + 2 * (0.5 - 0.2) = 0.8
        prob = simple_problem()
        model = ModelState(np.array([1.0]), IDENT)
        val = empirical_lagrangian(model, DualState(np.array([2.0])), prob)
        assert val == pytest.approx(0.8, abs=1e-12)

    def test_matches_independent_reimplementation(self):
        # independently coded sample-by-sample evaluation of the weighted form
        rng = np.random.default_rng(21)
        ep = random_enumerable(rng, n_candidates=3, m=2)
        prob = ep.problem
        model = ep.candidates[0]
        mu = rng.uniform(0, 2, size=2)

        def risk_by_hand(loss, ds):
            total = 0.0
            for i in range(len(ds)):
                total += eval_loss(loss, predict(model, ds.features[i]), ds.labels[i].item())
            return total / len(ds)

        expected = risk_by_hand(prob.objective_loss, prob.objective_dataset)
        for j, c in enumerate(prob.constraints):
            expected += mu[j] * (risk_by_hand(c.loss, c.dataset) - c.threshold_c)
        got = empirical_lagrangian(model, DualState(mu), prob)
        assert got == pytest.approx(expected, abs=1e-12)

    def test_length_mismatch(self):
        prob = simple_problem()
        model = ModelState(np.array([1.0]), IDENT)
        with pytest.raises(InputError):
            empirical_lagrangian(model, DualState(np.array([1.0, 2.0])), prob)

    def test_affinity_in_mu(self):
        rng = np.random.default_rng(33)
        ep = random_enumerable(rng, n_candidates=2, m=3)
        model = ep.candidates[0]
        mu1 = rng.uniform(0, 3, 3)
        mu2 = rng.uniform(0, 3, 3)
        lam = 0.37
        lhs = empirical_lagrangian(model, DualState(lam * mu1 + (1 - lam) * mu2), ep.problem)
        rhs = (lam * empirical_lagrangian(model, DualState(mu1), ep.problem)
               + (1 - lam) * empirical_lagrangian(model, DualState(mu2), ep.problem))
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_lagrangian_slack_consistency(self):
        rng = np.random.default_rng(41)
        ep = random_enumerable(rng, n_candidates=2, m=2)
        model = ep.candidates[1]
        mu = rng.uniform(0, 2, 2)
        obj = empirical_risk(model, ep.problem.objective_loss, ep.problem.objective_dataset)
        expected = obj + float(mu @ slacks(model, ep.problem))
        assert empirical_lagrangian(model, DualState(mu), ep.problem) == pytest.approx(
            expected, abs=1e-12)


class TestSlacks:
    def test_exact_feasibility_boundary(self):
        prob = Problem(objective_loss=ABS, objective_dataset=scalar_ds([0.1]),
                       constraints=(ConstraintSpec(loss=ABS, threshold_c=0.5,
                                                   dataset=scalar_ds([0.5])),))
        model = ModelState(np.array([1.0]), IDENT)
        assert slacks(model, prob)[0] == 0.0

    def test_substitution(self):
        prob = simple_problem()
        model = ModelState(np.array([1.0]), IDENT)
        assert slacks(model, prob)[0] == pytest.approx(0.3, abs=1e-15)

    def test_zero_one_exact_counting(self):
        # 10 scalar probabilities, threshold 0.5: 4 are misclassified by hand
        preds = np.array([0.9, 0.8, 0.2, 0.6, 0.4, 0.7, 0.1, 0.3, 0.95, 0.05])
        labels = np.array([1, 0, 0, 1, 1, 1, 0, 1, 1, 1])
        # miscounts: idx1 (0.8 vs 0), idx4 (0.4 vs 1), idx7 (0.3 vs 1), idx9 (0.05 vs 1)
        zo = LossSpec(kind="zero-one", bound_B=1.0)
        ds = scalar_ds(preds, labels=labels)
        model = ModelState(np.array([1.0]), IDENT)
        prob = Problem(objective_loss=zo, objective_dataset=ds,
                       constraints=(ConstraintSpec(loss=zo, threshold_c=0.15, dataset=ds),))
        assert slacks(model, prob)[0] == (4 / 10) - 0.15


class TestDualFunction:
    def test_zero_mu_enumeration_is_erm(self):
        rng = np.random.default_rng(3)
        ep = random_enumerable(rng, n_candidates=2, m=1)
        solver = InnerSolverConfig(method="enumeration", candidates=ep.candidates)
        val, minimizer = dual_function(DualState.zeros(1), ep.problem, solver,
                                       ep.candidates[0])
        risks = [empirical_risk(c, ep.problem.objective_loss, ep.problem.objective_dataset)
                 for c in ep.candidates]
        assert val == min(risks)
        assert minimizer is ep.candidates[int(np.argmin(risks))]

    def test_example1_hand_evaluated_comparison(self):
        # the Lagrangian of each candidate reduces to a closed form in tau_bar;
        # evaluate both by hand from the drawn arrays and check the argmin
        ep = example1_problem(50, seed=23)
        d0, d1, d2 = (ep.problem.objective_dataset,
                      ep.problem.constraints[0].dataset,
                      ep.problem.constraints[1].dataset)
        mu = np.array([0.7, 0.3])
        tau_bar = float(d1.features[:, 1].mean())

        def hand_lagrangian(theta):
            obj = float(np.abs(d0.labels * (d0.features @ theta)).sum()) / len(d0)
            s1 = (-theta[0] + tau_bar * theta[1]) - (-1.0)
            s2 = (-tau_bar * theta[0] + theta[1]) - 1.0
            return obj + mu[0] * s1 + mu[1] * s2

        vals = [hand_lagrangian(np.asarray(c.params)) for c in ep.candidates]
        solver = InnerSolverConfig(method="enumeration", candidates=ep.candidates)
        got_val, got_min = dual_function(DualState(mu), ep.problem, solver, ep.candidates[0])
        j = int(np.argmin(vals))
        assert got_min is ep.candidates[j]
        assert got_val == pytest.approx(vals[j], abs=1e-12)

    def test_tie_breaks_to_lowest_index(self):
        model = ModelState(np.array([1.0]), IDENT)
        twin = ModelState(np.array([1.0]), IDENT)
        prob = simple_problem()
        solver = InnerSolverConfig(method="enumeration", candidates=(model, twin))
        _, minimizer = dual_function(DualState.zeros(1), prob, solver, model)
        assert minimizer is model

    def test_weak_duality_against_ecrm(self):
        rng = np.random.default_rng(8)
        for _ in range(25):
            ep = random_enumerable(rng)
            solver = InnerSolverConfig(method="enumeration", candidates=ep.candidates)
            p_hat = ecrm_enumerate(ep).value
            for _ in range(5):
                mu = rng.uniform(0, 5, ep.problem.m)
                d_val, _ = dual_function(DualState(mu), ep.problem, solver, ep.candidates[0])
                assert d_val <= p_hat

    def test_concavity(self):
        rng = np.random.default_rng(15)
        ep = random_enumerable(rng, n_candidates=4, m=2)
        solver = InnerSolverConfig(method="enumeration", candidates=ep.candidates)

        def d(mu):
            return dual_function(DualState(mu), ep.problem, solver, ep.candidates[0])[0]

        for _ in range(200):
            mu1 = rng.uniform(0, 4, 2)
            mu2 = rng.uniform(0, 4, 2)
            lam = float(rng.uniform())
            assert d(lam * mu1 + (1 - lam) * mu2) >= (
                lam * d(mu1) + (1 - lam) * d(mu2) - 1e-10)

    def test_gradient_solver_improves_and_reports_best(self):
        rng = np.random.default_rng(2)
        ds = Dataset(features=rng.uniform(-1, 1, (30, 2)), labels=rng.choice([0, 1], 30))
        ce = LossSpec.cross_entropy()
        prob = Problem(objective_loss=ce, objective_dataset=ds)
        init = init_model(LogisticArch(2))
        solver = InnerSolverConfig(method="gradient", epochs=5, batch_size=8,
                                   optimizer="adam", step_size=0.1)
        val, minimizer = dual_function(DualState.zeros(0), prob, solver, init, seed=1)
        init_val = empirical_risk(init, ce, ds)
        assert val <= init_val
        assert val == empirical_risk(minimizer, ce, ds)

    def test_gradient_solver_requires_differentiable_losses(self):
        zo = LossSpec(kind="zero-one", bound_B=1.0)
        ds = scalar_ds([0.2, 0.8], labels=[0, 1])
        prob = Problem(objective_loss=zo, objective_dataset=ds)
        solver = InnerSolverConfig(method="gradient", epochs=1, step_size=0.1)
        with pytest.raises(SurrogateRequiredError):
            dual_function(DualState.zeros(0), prob, solver,
                          ModelState(np.array([1.0]), IDENT), seed=0)


class TestValidation:
    def test_dual_state_rejects_negative(self):
        with pytest.raises(InputError):
            DualState(np.array([-0.1]))

    def test_dual_state_rejects_nonfinite(self):
        with pytest.raises(InputError):
            DualState(np.array([np.inf]))

    def test_enumeration_needs_candidates(self):
        with pytest.raises(ConfigurationError):
            InnerSolverConfig(method="enumeration")

    def test_gradient_needs_positive_epochs(self):
        with pytest.raises(ConfigurationError):
            InnerSolverConfig(method="gradient", epochs=0)

"""Two-stage optimization with post-hoc regret: solving, training, evaluation.

Stage 1 solves the parameterized problem under predicted parameters and
commits softly to its solution.  Once true parameters are revealed, Stage 2
re-optimizes with a penalty for deviating from the commitment.  The
post-hoc regret of a prediction is

    preg = obj(x2, theta) + Pen(x1 -> x2, theta) - obj(x*(theta), theta)

which is nonnegative and zero under perfect prediction.  Training treats
the regret of the barrier-relaxed stages as a differentiable surrogate:
its weight gradient is assembled from the analytic regret derivatives, the
KKT implicit Jacobians of both stages, the template slot maps, and network
backpropagation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kkt
from .barrier import BarrierSolution, relax, solve_barrier
from .errors import (
    CorrectionInfeasible,
    Infeasible,
    NotInterior,
    NumericalFailure,
    SingularSystem,
    SolverFailure,
)
from .exact import ExactSolution, Status, solve_milp_bnb
from .milp import ParamTemplate, StandardFormMilp, backprop_slots, check_feasibility, instantiate
from .predictor import Mlp, adam_step, backward, forward, init_adam, init_mlp

log = logging.getLogger("tspo")


@dataclass(frozen=True)
class TwoStageProblem:
    """One benchmark family: templates, penalty, and regret derivatives.

    ``stage2_template(theta)`` returns a template over the Stage-1 decision
    vector, so the same slot machinery that injects predicted parameters
    into Stage 1 also injects the commitment into Stage 2.  ``dPReg_dx2``
    and ``dPReg_dx1`` are the analytic partial derivatives of regret in the
    final and committed solutions; ``dPReg_dx2`` is sized for the full
    Stage-2 variable vector (auxiliary penalty variables included).
    """

    name: str
    stage1: ParamTemplate
    stage2_template: Callable[[np.ndarray], ParamTemplate]
    penalty_eval: Callable[[np.ndarray, np.ndarray, np.ndarray], float]
    dPReg_dx2: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    dPReg_dx1: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    dx1_slots: tuple[str, ...]
    dx2_slots: tuple[str, ...]
    maximization: bool = False
    # Stage-2 variable vectors may carry auxiliaries; the first slice of this
    # length is the decision part comparable with Stage-1 solutions.
    stage2_primary_dim: int = 0

    def stage2_build(self, x1: np.ndarray, theta: np.ndarray) -> StandardFormMilp:
        return instantiate(self.stage2_template(theta), x1)

    def extract_x2(self, x2_full: np.ndarray) -> np.ndarray:
        d = self.stage2_primary_dim or self.stage1.skeleton.d
        return np.asarray(x2_full)[:d]


@dataclass(frozen=True)
class RegretReport:
    preg: float
    stage1_obj: float
    stage2_obj: float
    penalty: float
    true_opt: float
    stage1_feasible_under_truth: bool


@dataclass
class TrainConfig:
    epochs: int = 12
    lr: float = 1e-3
    mu_cutoff: float = 1e-3
    hidden: tuple[int, ...] = (16, 16, 16)
    seed: int = 0
    val_fraction: float = 0.2
    track_validation: bool = True


_TOV_CACHE: dict[tuple[int, bytes], ExactSolution] = {}


def true_optimum(problem: TwoStageProblem, theta: np.ndarray) -> ExactSolution:
    """Optimum under the true parameters; cached since every method evaluated
    on the same test instance shares this solve."""
    key = (id(problem), np.asarray(theta, dtype=float).tobytes())
    sol = _TOV_CACHE.get(key)
    if sol is None:
        sol = solve_milp_bnb(instantiate(problem.stage1, theta))
        if len(_TOV_CACHE) > 100_000:
            _TOV_CACHE.clear()
        _TOV_CACHE[key] = sol
    if sol.status is not Status.OPTIMAL:
        raise Infeasible(f"{problem.name}: no true optimum ({sol.status.value})")
    return sol


def stage1_solve(problem: TwoStageProblem, theta_hat: np.ndarray, mode: str = "exact", mu_cutoff: float = 1e-3):
    """Solve Stage 1 under estimated parameters.

    ``exact`` returns the MILP optimum; ``barrier`` returns the interior
    solution of the relaxation at the cutoff (the training surrogate).
    """
    milp = instantiate(problem.stage1, theta_hat)
    if mode == "exact":
        sol = solve_milp_bnb(milp)
        if sol.status is not Status.OPTIMAL:
            raise Infeasible(f"{problem.name}: stage 1 {sol.status.value} under estimated parameters")
        return sol
    if mode == "barrier":
        return solve_barrier(milp, mu_cutoff)
    raise ValueError(f"unknown mode {mode!r}")


def stage2_solve(problem: TwoStageProblem, x1: np.ndarray, theta: np.ndarray, mode: str = "exact", mu_cutoff: float = 1e-3):
    """Solve the penalty-augmented Stage 2 under true parameters."""
    milp = problem.stage2_build(np.asarray(x1, dtype=float), theta)
    if mode == "exact":
        sol = solve_milp_bnb(milp)
        if sol.status is not Status.OPTIMAL:
            raise Infeasible(f"{problem.name}: stage 2 {sol.status.value}; benchmark should be feasible by construction")
        return sol
    if mode == "barrier":
        return solve_barrier(milp, mu_cutoff)
    raise ValueError(f"unknown mode {mode!r}")


def post_hoc_regret(problem: TwoStageProblem, theta_hat: np.ndarray, theta: np.ndarray) -> RegretReport:
    """Exact post-hoc regret of predicting ``theta_hat`` when truth is ``theta``."""
    s1 = stage1_solve(problem, theta_hat)
    s2 = stage2_solve(problem, s1.x, theta)
    opt = true_optimum(problem, theta)
    true_milp = instantiate(problem.stage1, theta)
    x2 = problem.extract_x2(s2.x)
    stage2_obj = float(true_milp.c @ x2)
    pen = float(problem.penalty_eval(s1.x, s2.x, theta))
    feas = check_feasibility(true_milp, s1.x).feasible
    return RegretReport(
        preg=stage2_obj + pen - opt.objective,
        stage1_obj=s1.objective,
        stage2_obj=stage2_obj,
        penalty=pen,
        true_opt=opt.objective,
        stage1_feasible_under_truth=feas,
    )


def _surrogate_stages(problem, theta_hat, theta, mu_cutoff):
    try:
        sol1 = stage1_solve(problem, theta_hat, mode="barrier", mu_cutoff=mu_cutoff)
        sol2 = stage2_solve(problem, sol1.x, theta, mode="barrier", mu_cutoff=mu_cutoff)
    except (Infeasible, NumericalFailure, SingularSystem) as exc:
        raise SolverFailure(f"{problem.name}: surrogate solve failed: {exc}") from exc
    return sol1, sol2


def surrogate_loss(
    problem: TwoStageProblem,
    net: Mlp,
    features: np.ndarray,
    theta: np.ndarray,
    mu_cutoff: float = 1e-3,
    tov: float = 0.0,
) -> float:
    """Value of the barrier-relaxed regret (used by gradient checks)."""
    theta_hat, _ = forward(net, features)
    sol1, sol2 = _surrogate_stages(problem, theta_hat, theta, mu_cutoff)
    true_milp = instantiate(problem.stage1, theta)
    x2 = problem.extract_x2(sol2.x)
    return float(true_milp.c @ x2) + float(problem.penalty_eval(sol1.x, sol2.x, theta)) - tov


def surrogate_loss_grad(
    problem: TwoStageProblem,
    net: Mlp,
    features: np.ndarray,
    theta: np.ndarray,
    mu_cutoff: float = 1e-3,
):
    """Weight gradient of the relaxed regret via both KKT Jacobians.

    Chain: regret derivatives at the relaxed solutions, pulled through the
    Stage-2 solution map (commitment slots), added to the direct regret
    derivative in the commitment, pulled through the Stage-1 solution map
    (parameter slots), and finally through the network.
    """
    theta_hat, tape = forward(net, features)
    sol1, sol2 = _surrogate_stages(problem, theta_hat, theta, mu_cutoff)

    milp2 = problem.stage2_build(sol1.x, theta)
    lp2 = relax(milp2)
    t2 = problem.stage2_template(theta)
    u2 = np.asarray(problem.dPReg_dx2(sol1.x, sol2.x, theta), dtype=float)
    try:
        vjps2 = kkt.vjp(lp2, sol2, u2, blocks=problem.dx2_slots)
        via_stage2 = backprop_slots(t2, vjps2)  # d(regret)/d(x1) through stage 2
        u1 = via_stage2 + np.asarray(problem.dPReg_dx1(sol1.x, sol2.x, theta), dtype=float)

        milp1 = instantiate(problem.stage1, theta_hat)
        vjps1 = kkt.vjp(relax(milp1), sol1, u1, blocks=problem.dx1_slots)
    except (NumericalFailure, SingularSystem, NotInterior) as exc:
        raise SolverFailure(f"{problem.name}: gradient assembly failed: {exc}") from exc
    dtheta = backprop_slots(problem.stage1, vjps1)
    return backward(net, tape, dtheta)


@dataclass
class TrainHistory:
    epochs: list[int] = field(default_factory=list)
    mean_val_preg: list[float] = field(default_factory=list)
    skipped: int = 0

    def rows(self) -> list[tuple[int, float]]:
        return list(zip(self.epochs, self.mean_val_preg))


def train(problem: TwoStageProblem, instances, config: TrainConfig) -> tuple[Mlp, TrainHistory]:
    """Empirical risk minimization on the surrogate regret.

    Per-instance stochastic steps in a freshly shuffled order each epoch;
    instances whose relaxations fail to solve are skipped with a warning.
    The history records exact mean regret on a fixed validation slice (the
    last fifth of the training set) after each epoch.
    """
    if not len(instances):
        raise ValueError("empty training set")
    m = instances[0][0].shape[1]
    net = init_mlp((m, *config.hidden, 1), seed=config.seed)
    state = init_adam(net, lr=config.lr)
    history = TrainHistory()
    n_val = int(round(config.val_fraction * len(instances)))
    val = instances[len(instances) - n_val :] if n_val else []
    rng = np.random.default_rng(config.seed)
    order = np.arange(len(instances))

    def validate(epoch: int):
        if not config.track_validation or not val:
            return
        pregs = []
        for features, theta in val:
            theta_hat, _ = forward(net, features)
            pregs.append(post_hoc_regret(problem, theta_hat, theta).preg)
        history.epochs.append(epoch)
        history.mean_val_preg.append(float(np.mean(pregs)))

    validate(0)
    for epoch in range(1, config.epochs + 1):
        rng.shuffle(order)
        for i in order:
            features, theta = instances[i]
            try:
                grads = surrogate_loss_grad(problem, net, features, theta, config.mu_cutoff)
            except SolverFailure as exc:
                history.skipped += 1
                log.warning("skipping instance %d: %s", i, exc)
                continue
            adam_step(net, state, grads)
        validate(epoch)
    return net, history


@dataclass(frozen=True)
class EvalSummary:
    mean_preg: float
    std_preg: float
    mean_tov: float
    feasibility_fraction: float
    n: int


def evaluate(problem: TwoStageProblem, predict, instances, jobs: int = 1) -> tuple[EvalSummary, list[RegretReport]]:
    """Exact two-stage evaluation of any predictor over a test set.

    ``predict`` is called as predict(features, theta); fitted models ignore
    the second argument.  Reported TOV is in the problem's natural sense
    (sign flipped back for maximization benchmarks).
    """
    items = list(enumerate(instances))

    def one(item):
        _, (features, theta) = item
        theta_hat = np.asarray(predict(features, theta), dtype=float)
        return post_hoc_regret(problem, theta_hat, theta)

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(one, items))
    else:
        reports = [one(item) for item in items]
    pregs = np.array([r.preg for r in reports])
    tovs = np.array([r.true_opt for r in reports])
    if problem.maximization:
        tovs = -tovs
    feas = np.mean([r.stage1_feasible_under_truth for r in reports]) if reports else 0.0
    std = float(np.std(pregs, ddof=1)) if len(pregs) > 1 else 0.0
    return (
        EvalSummary(float(np.mean(pregs)), std, float(np.mean(tovs)), float(feas), len(reports)),
        reports,
    )


def as_predict_fn(model):
    """Wrap a fitted model (with .predict) into the evaluate() calling convention."""

    def predict(features, theta):
        return model.predict(features)

    return predict


def perfect_predictor(features, theta):
    return theta


@dataclass(frozen=True)
class Proposition1Verdict:
    holds: bool
    two_stage_value: float
    corrected_value: float


def proposition1_check(problem: TwoStageProblem, theta_hat, theta, correction) -> Proposition1Verdict:
    """Stage-2 optimization never loses to a hand-written correction.

    Both sides are objective-plus-penalty under the true parameters; the
    correction output must itself be feasible there.
    """
    s1 = stage1_solve(problem, theta_hat)
    x_corr = np.asarray(correction(s1.x), dtype=float)
    true_milp = instantiate(problem.stage1, theta)
    if not check_feasibility(true_milp, x_corr).feasible:
        raise CorrectionInfeasible("correction output infeasible under true parameters")
    s2 = stage2_solve(problem, s1.x, theta)
    x2 = problem.extract_x2(s2.x)
    lhs = float(true_milp.c @ x2) + float(problem.penalty_eval(s1.x, s2.x, theta))
    # Penalty comparison needs the corrected point in stage-2 variable shape.
    x_corr_full = np.concatenate([x_corr, np.zeros(len(s2.x) - len(x_corr))]) if len(s2.x) > len(x_corr) else x_corr
    rhs = float(true_milp.c @ x_corr) + float(problem.penalty_eval(s1.x, x_corr_full, theta))
    return Proposition1Verdict(holds=lhs <= rhs + 1e-9, two_stage_value=lhs, corrected_value=rhs)

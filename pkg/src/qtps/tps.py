"""Hybrid Metropolis chain over (path, sweep-time) pairs.

The chain state is a coarse path I plus an annealer budget t. Each step
proposes a new budget by one Euler step of an Ornstein-Uhlenbeck walk,

    t' = t - dt_prop * k * (t - t0) + sqrt(2 dt_prop) * xi,

asks the backend for a trial path at budget t', and accepts with

    min[ 1, p0(t') P(t|t') / (p0(t) P(t'|t))
            * P(E|t) / P(E'|t')
            * exp(S(I) - S(I')) ],

where P(t'|t) is the Gaussian kernel of the budget walk, p0 is its
stationary law N(t0, 1/k), and P(E|t) is the calibrated Gaussian
surrogate evaluated at the path action. Everything is computed in log
space. Proposals that leave the calibrated budget range are rejected
outright (state retained), which keeps the proposal density exact.

Trial reads that fail path decoding are logged as wrong-topology steps
and never advance the state; backend failures likewise, and the chain
aborts once failures dominate.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .annealer import AnnealRequest, Calibration, anneal, log_outcome_density
from .dynamics import rng_from_seed
from .errors import AnnealerError, ChainAbortedError, ValidationError
from .graph import CoarsePath, TransitionGraph
from .qubo import QuboProblem, decode


@dataclass(frozen=True)
class ChainConfig:
    """Budget-walk constants and chain bookkeeping."""

    t0: float = 150.0              # seconds; budget the walk is centered on
    k: float = 2e-4                # 1/seconds; harmonic drift strength
    dt_prop: float = 1.0           # seconds; proposal step of the budget walk
    n_steps: int = 100
    seed: int = 0
    initial_budget: float | None = None   # None: t0
    reads_per_step: int = 1
    max_init_attempts: int = 50
    abort_failure_fraction: float = 0.5
    min_steps_before_abort: int = 8

    def __post_init__(self):
        if self.t0 <= 0 or self.k <= 0 or self.dt_prop <= 0:
            raise ValidationError("t0, k, dt_prop must all be > 0")
        if self.n_steps < 1:
            raise ValidationError("n_steps must be >= 1")

    @property
    def start_budget(self) -> float:
        return self.t0 if self.initial_budget is None else self.initial_budget

    def to_dict(self) -> dict:
        return {
            "t0": self.t0, "k": self.k, "dt_prop": self.dt_prop,
            "n_steps": self.n_steps, "seed": self.seed,
            "initial_budget": self.initial_budget,
            "reads_per_step": self.reads_per_step,
            "max_init_attempts": self.max_init_attempts,
        }


class Outcome(str, Enum):
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    WRONG_TOPOLOGY = "wrong-topology"
    BACKEND_FAILURE = "backend-failure"


@dataclass
class ChainState:
    path: CoarsePath
    budget: float


@dataclass
class ChainRecord:
    """Per-step log entry; current_* fields reflect the post-step state."""

    step: int
    proposed_budget: float
    outcome: Outcome
    proposed_action: float | None
    accept_prob: float | None
    proposed_path: tuple | None
    current_path: tuple
    current_action: float
    current_budget: float


@dataclass
class ChainSummary:
    steps: int
    accepted: int
    rejected: int
    wrong_topology: int
    backend_failures: int

    def reconciles(self) -> bool:
        return self.accepted + self.rejected + self.wrong_topology + self.backend_failures == self.steps

    def to_dict(self) -> dict:
        return {
            "steps": self.steps, "accepted": self.accepted, "rejected": self.rejected,
            "wrong_topology": self.wrong_topology, "backend_failures": self.backend_failures,
        }


@dataclass
class ChainResult:
    records: list
    summary: ChainSummary
    seed: int

    def state_paths(self):
        return [r.current_path for r in self.records]

    def to_csv(self, path):
        """`step,t_sweep,action,outcome,accept_prob` rows."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "t_sweep", "action", "outcome", "accept_prob"])
            for r in self.records:
                writer.writerow([
                    r.step,
                    repr(float(r.current_budget)),
                    repr(float(r.current_action)),
                    r.outcome.value,
                    "" if r.accept_prob is None else repr(float(r.accept_prob)),
                ])

    def to_sidecar_json(self, path=None):
        doc = {
            "seed": self.seed,
            "summary": self.summary.to_dict(),
            "steps": [
                {
                    "step": r.step,
                    "outcome": r.outcome.value,
                    "proposed_budget": float(r.proposed_budget),
                    "proposed_path": None if r.proposed_path is None else list(map(int, r.proposed_path)),
                    "proposed_action": None if r.proposed_action is None else float(r.proposed_action),
                    "accept_prob": None if r.accept_prob is None else float(r.accept_prob),
                    "path": list(map(int, r.current_path)),
                    "action": float(r.current_action),
                    "t_sweep": float(r.current_budget),
                }
                for r in self.records
            ],
        }
        if path is None:
            return doc
        with open(path, "w") as fh:
            json.dump(doc, fh)
        return doc


def propose_budget(t: float, cfg: ChainConfig, rng: np.random.Generator) -> float:
    """One harmonic-drift Brownian update of the sweep budget."""
    if t <= 0:
        raise ValidationError("budget must be > 0")
    xi = rng.standard_normal()
    return t - cfg.dt_prop * cfg.k * (t - cfg.t0) + np.sqrt(2.0 * cfg.dt_prop) * xi


def budget_transition_logpdf(t_new: float, t_old: float, cfg: ChainConfig) -> float:
    """log P(t_new | t_old) of the budget walk: Gaussian, variance 2 dt."""
    mean = t_old - cfg.dt_prop * cfg.k * (t_old - cfg.t0)
    var = 2.0 * cfg.dt_prop
    return -0.5 * (t_new - mean) ** 2 / var - 0.5 * np.log(2.0 * np.pi * var)


def budget_stationary_logpdf(t: float, cfg: ChainConfig) -> float:
    """log p0(t): stationary law of the walk, N(t0, 1/k)."""
    var = 1.0 / cfg.k
    return -0.5 * (t - cfg.t0) ** 2 / var - 0.5 * np.log(2.0 * np.pi * var)


def log_acceptance_ratio(
    old: ChainState, new: ChainState, cal: Calibration, cfg: ChainConfig
) -> float:
    """Log of the Metropolis ratio before clipping at one.

    Both states must carry valid paths and calibrated budgets; the trial
    densities P(E|t) are evaluated at each state's own action/budget.
    """
    t, tp = old.budget, new.budget
    lr = budget_stationary_logpdf(tp, cfg) - budget_stationary_logpdf(t, cfg)
    lr += budget_transition_logpdf(t, tp, cfg) - budget_transition_logpdf(tp, t, cfg)
    lr += log_outcome_density(cal, old.path.action, t)
    lr -= log_outcome_density(cal, new.path.action, tp)
    lr += old.path.action - new.path.action
    return float(lr)


def acceptance(old: ChainState, new: ChainState, cal: Calibration, cfg: ChainConfig) -> float:
    """min(1, ratio), computed in log space; never NaN."""
    lr = log_acceptance_ratio(old, new, cal, cfg)
    return float(np.exp(min(0.0, lr)))


def _initial_state(graph, problem, cal, backend, cfg, rng) -> ChainState:
    budget = cfg.start_budget
    if not cal.covers(budget):
        raise ValidationError(
            f"initial budget {budget:.6g} outside calibrated range "
            f"[{cal.budget_min:.6g}, {cal.budget_max:.6g}]"
        )
    for _ in range(cfg.max_init_attempts):
        sub = int(rng.integers(0, 2**31 - 1))
        out = anneal(AnnealRequest(problem, budget, seed=sub, num_reads=cfg.reads_per_step), backend)
        rep = decode(problem, out.best)
        if rep.valid:
            return ChainState(path=rep.path, budget=budget)
    raise ValidationError(
        f"no valid initial path after {cfg.max_init_attempts} anneals at budget {budget:.6g}"
    )


def run_chain(
    graph: TransitionGraph,
    problem: QuboProblem,
    cal: Calibration,
    backend,
    cfg: ChainConfig,
) -> ChainResult:
    """Drive the hybrid Metropolis chain for cfg.n_steps steps."""
    rng = rng_from_seed(cfg.seed)
    state = _initial_state(graph, problem, cal, backend, cfg, rng)
    records: list[ChainRecord] = []
    counts = {o: 0 for o in Outcome}
    failures = 0

    for step_idx in range(cfg.n_steps):
        t_prop = propose_budget(state.budget, cfg, rng)

        def log_step(outcome, prop_action=None, prob=None, prop_path=None):
            counts[outcome] += 1
            records.append(ChainRecord(
                step=step_idx,
                proposed_budget=float(t_prop),
                outcome=outcome,
                proposed_action=prop_action,
                accept_prob=prob,
                proposed_path=prop_path,
                current_path=state.path.nodes,
                current_action=state.path.action,
                current_budget=state.budget,
            ))

        if not cal.covers(t_prop):
            # out-of-range budgets are rejected wholesale; keeps Eq. ratios exact
            log_step(Outcome.REJECTED, prob=0.0)
            continue

        backend_seed = int(rng.integers(0, 2**31 - 1))
        u = float(rng.random())     # drawn unconditionally to keep the stream aligned
        try:
            out = anneal(
                AnnealRequest(problem, float(t_prop), seed=backend_seed,
                              num_reads=cfg.reads_per_step),
                backend,
            )
        except AnnealerError:
            failures += 1
            log_step(Outcome.BACKEND_FAILURE)
            done = step_idx + 1
            if done >= cfg.min_steps_before_abort and failures > cfg.abort_failure_fraction * done:
                raise ChainAbortedError(
                    f"{failures}/{done} steps failed at the backend", records=records
                )
            continue

        rep = decode(problem, out.best)
        if not rep.valid:
            log_step(Outcome.WRONG_TOPOLOGY)
            continue

        candidate = ChainState(path=rep.path, budget=float(t_prop))
        prob = acceptance(state, candidate, cal, cfg)
        if u < prob:
            state = candidate
            log_step(Outcome.ACCEPTED, prop_action=rep.path.action, prob=prob,
                     prop_path=rep.path.nodes)
        else:
            log_step(Outcome.REJECTED, prop_action=rep.path.action, prob=prob,
                     prop_path=rep.path.nodes)

    return ChainResult(records=records, summary=_summarize(records, counts), seed=cfg.seed)


def _summarize(records, counts) -> ChainSummary:
    return ChainSummary(
        steps=len(records),
        accepted=counts[Outcome.ACCEPTED],
        rejected=counts[Outcome.REJECTED],
        wrong_topology=counts[Outcome.WRONG_TOPOLOGY],
        backend_failures=counts[Outcome.BACKEND_FAILURE],
    )

"""Trial-path generators behind a single backend contract.

A backend turns (problem, budget, num_reads, seed) into bit vectors.
The budget is an abstract effort knob in seconds of nominal solver
time; the local simulated-annealing backend maps it to Metropolis
sweeps via a configurable rate kappa, the remote client forwards it to
a QUBO service verbatim. Energies reported by a backend are never
trusted: `anneal` re-evaluates every read against the problem.

`calibrate` estimates the conditional outcome distribution P(E | budget)
on a budget grid from the actions of valid-topology reads, summarizing
each budget by a Gaussian (lowest-order cumulant expansion) with a
floored standard deviation.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

import numpy as np
import requests
from numba import njit

from .dynamics import rng_from_seed
from .errors import (
    CalibrationError,
    CalibrationRangeError,
    RemoteProtocolError,
    RemoteTimeoutError,
    RemoteTransportError,
    ValidationError,
)
from .qubo import BinaryAssignment, QuboProblem, decode

DELTA_FLOOR = 1e-3


@dataclass(frozen=True)
class AnnealRequest:
    problem: QuboProblem
    budget: float                  # t_sweep, seconds of nominal effort
    seed: int = 0
    num_reads: int = 1

    def __post_init__(self):
        if self.budget <= 0:
            raise ValidationError("anneal budget must be > 0")
        if self.num_reads < 1:
            raise ValidationError("num_reads must be >= 1")


@dataclass
class AnnealOutcome:
    best: BinaryAssignment
    reads: list                    # [BinaryAssignment], energies re-evaluated
    wall_time: float
    backend: str


@njit(cache=True)
def _sa_sweeps(linear, indptr, indices, data, betas, init_ones_prob, seed):
    """Single-read simulated annealing over 0/1 bits.

    Sequential single-bit Metropolis flips; one pass over all bits per
    inverse temperature in `betas`. Incremental local fields keep a
    flip at O(degree).
    """
    np.random.seed(seed)
    n = linear.shape[0]
    x = np.empty(n, dtype=np.uint8)
    for i in range(n):
        x[i] = 1 if np.random.random() < init_ones_prob else 0
    f = linear.copy()
    for i in range(n):
        if x[i] == 1:
            for p in range(indptr[i], indptr[i + 1]):
                f[indices[p]] += data[p]
    for sw in range(betas.shape[0]):
        beta = betas[sw]
        for i in range(n):
            de = f[i] if x[i] == 0 else -f[i]
            if de <= 0.0 or np.random.random() < np.exp(-de * beta):
                if x[i] == 0:
                    delta = 1.0
                    x[i] = 1
                else:
                    delta = -1.0
                    x[i] = 0
                for p in range(indptr[i], indptr[i + 1]):
                    f[indices[p]] += delta * data[p]
    return x


class SimulatedAnnealingBackend:
    """Local Metropolis annealer; deterministic given a seed.

    sweeps = round(kappa * budget). The temperature schedule is
    geometric from t_hot to t_cold; t_hot defaults to the largest
    possible single-flip energy change of the problem, so the first
    sweeps accept almost anything.
    """

    name = "simulated-annealing"

    def __init__(self, kappa: float = 2.0, t_hot: float | None = None,
                 t_cold: float = 0.05, init_ones_prob: float = 0.25):
        if kappa <= 0 or t_cold <= 0:
            raise ValidationError("kappa and t_cold must be > 0")
        if t_hot is not None and t_hot <= t_cold:
            raise ValidationError("t_hot must exceed t_cold")
        if not (0.0 <= init_ones_prob <= 1.0):
            raise ValidationError("init_ones_prob must lie in [0, 1]")
        self.kappa = float(kappa)
        self.t_hot = t_hot
        self.t_cold = float(t_cold)
        self.init_ones_prob = float(init_ones_prob)

    def _schedule(self, problem: QuboProblem, n_sweeps: int) -> np.ndarray:
        if self.t_hot is not None:
            hot = self.t_hot
        else:
            linear, indptr, _, data = problem.dense_arrays()
            scale = np.abs(linear).copy()
            for i in range(problem.num_bits):
                scale[i] += np.abs(data[indptr[i]:indptr[i + 1]]).sum()
            hot = max(float(scale.max()), 2.0 * self.t_cold)
        temps = np.geomspace(hot, self.t_cold, n_sweeps)
        return (1.0 / temps).astype(np.float64)

    def sample(self, problem: QuboProblem, budget: float, num_reads: int, seed: int):
        n_sweeps = max(1, int(round(self.kappa * budget)))
        betas = self._schedule(problem, n_sweeps)
        linear, indptr, indices, data = problem.dense_arrays()
        rng = rng_from_seed(seed)
        reads = []
        for _ in range(num_reads):
            sub = int(rng.integers(0, 2**31 - 1))
            reads.append(_sa_sweeps(linear, indptr, indices, data, betas,
                                    self.init_ones_prob, sub))
        return reads


class RemoteQuboBackend:
    """Client for a JSON QUBO service (POST {url}/solve).

    Request:  {qubo: {num_bits, linear, quadratic, offset}, budget_seconds,
               num_reads, seed?}
    Response: {samples: [{bits: [0|1, ...], energy}, ...],
               solver_time_seconds}

    The request deadline is 2 * budget + 10 seconds. Failures are never
    retried here; one request per Monte Carlo step keeps the proposal
    distribution unbiased, so retry policy belongs to the caller.
    """

    name = "remote-qubo"

    def __init__(self, url: str, auth_token: str | None = None, session=None):
        self.url = url.rstrip("/")
        self.auth_token = auth_token
        self._session = session or requests.Session()

    def sample(self, problem: QuboProblem, budget: float, num_reads: int, seed: int):
        payload = {
            "qubo": problem.to_json(),
            "budget_seconds": float(budget),
            "num_reads": int(num_reads),
            "seed": int(seed),
        }
        headers = {"Content-Type": "application/json"}
        if self.auth_token:
            headers["Authorization"] = f"Bearer {self.auth_token}"
        timeout = 2.0 * budget + 10.0
        try:
            resp = self._session.post(f"{self.url}/solve", json=payload,
                                      headers=headers, timeout=timeout)
        except requests.Timeout as err:
            raise RemoteTimeoutError(f"no answer within {timeout:.1f}s") from err
        except requests.RequestException as err:
            raise RemoteTransportError(f"transport failure: {err}") from err
        if resp.status_code != 200:
            raise RemoteProtocolError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            doc = resp.json()
            samples = doc["samples"]
            reads = []
            for s in samples:
                bits = np.asarray(s["bits"], dtype=np.uint8)
                if bits.shape != (problem.num_bits,) or np.any(bits > 1):
                    raise KeyError("bits")
                reads.append(bits)
        except (KeyError, TypeError, ValueError) as err:
            raise RemoteProtocolError(f"malformed response: {err}") from err
        if not reads:
            raise RemoteProtocolError("response contains no samples")
        return reads


def anneal(req: AnnealRequest, backend) -> AnnealOutcome:
    """Run one sampling call and re-evaluate every read locally."""
    start = time.perf_counter()
    raw_reads = backend.sample(req.problem, req.budget, req.num_reads, req.seed)
    wall = time.perf_counter() - start
    reads = [BinaryAssignment(bits=b, energy=req.problem.evaluate(b)) for b in raw_reads]
    best = min(reads, key=lambda r: (r.energy, tuple(r.bits)))
    return AnnealOutcome(best=best, reads=reads, wall_time=wall, backend=backend.name)


@dataclass
class Calibration:
    """Per-budget Gaussian summary of valid-topology trial actions."""

    budgets: np.ndarray
    e_mean: np.ndarray
    e_std: np.ndarray              # floored at delta_floor
    success_rate: np.ndarray
    n_valid: np.ndarray
    n_attempts: np.ndarray
    delta_floor: float = DELTA_FLOOR

    def __post_init__(self):
        self.budgets = np.asarray(self.budgets, dtype=float)
        if np.any(np.diff(self.budgets) <= 0):
            raise ValidationError("budget grid must be strictly increasing")
        self.e_mean = np.asarray(self.e_mean, dtype=float)
        self.e_std = np.asarray(self.e_std, dtype=float)
        if np.any(self.e_std < self.delta_floor):
            raise ValidationError("calibration stds must respect the floor")

    @property
    def budget_min(self) -> float:
        return float(self.budgets[0])

    @property
    def budget_max(self) -> float:
        return float(self.budgets[-1])

    def covers(self, budget: float) -> bool:
        return self.budget_min <= budget <= self.budget_max

    def params_at(self, budget: float):
        """(mean, std) linearly interpolated between bracketing budgets."""
        if not self.covers(budget):
            raise CalibrationRangeError(
                f"budget {budget:.6g} outside calibrated range "
                f"[{self.budget_min:.6g}, {self.budget_max:.6g}]"
            )
        mean = float(np.interp(budget, self.budgets, self.e_mean))
        std = float(np.interp(budget, self.budgets, self.e_std))
        return mean, std

    def overall_success_rate(self) -> float:
        return float(self.n_valid.sum() / max(1, self.n_attempts.sum()))

    def to_json(self, path=None):
        doc = {
            "budgets": [float(v) for v in self.budgets],
            "e_mean": [float(v) for v in self.e_mean],
            "e_std": [float(v) for v in self.e_std],
            "success_rate": [float(v) for v in self.success_rate],
            "n_valid": [int(v) for v in self.n_valid],
            "n_attempts": [int(v) for v in self.n_attempts],
            "delta_floor": float(self.delta_floor),
        }
        if path is None:
            return doc
        with open(path, "w") as fh:
            json.dump(doc, fh)
        return doc

    @classmethod
    def from_json(cls, source) -> "Calibration":
        if isinstance(source, str):
            with open(source) as fh:
                doc = json.load(fh)
        elif hasattr(source, "read"):
            doc = json.load(source)
        else:
            doc = source
        return cls(
            budgets=np.asarray(doc["budgets"], dtype=float),
            e_mean=np.asarray(doc["e_mean"], dtype=float),
            e_std=np.asarray(doc["e_std"], dtype=float),
            success_rate=np.asarray(doc["success_rate"], dtype=float),
            n_valid=np.asarray(doc["n_valid"], dtype=int),
            n_attempts=np.asarray(doc["n_attempts"], dtype=int),
            delta_floor=float(doc.get("delta_floor", DELTA_FLOOR)),
        )


def calibrate(
    problem: QuboProblem,
    budgets,
    reads_per_budget: int,
    backend,
    seed: int = 0,
    delta_floor: float = DELTA_FLOOR,
    reads_per_call: int = 1,
) -> Calibration:
    """Estimate P(E | budget) over a budget grid.

    Runs reads_per_budget independent anneals per budget, decodes each
    call's best read, and keeps the actions of valid topologies. Every
    budget must yield at least one valid outcome. reads_per_call must
    match the Markov chain's trial move (the calibration has to sample
    the same conditional outcome distribution the chain proposes from).
    """
    budgets = np.asarray(sorted(float(b) for b in budgets))
    if budgets.size < 1:
        raise ValidationError("need at least one calibration budget")
    if reads_per_budget < 20:
        raise ValidationError("calibration needs reads_per_budget >= 20")
    rng = rng_from_seed(seed)
    e_mean, e_std, rate, n_valid, n_att = [], [], [], [], []
    for budget in budgets:
        actions = []
        for _ in range(reads_per_budget):
            sub = int(rng.integers(0, 2**31 - 1))
            out = anneal(AnnealRequest(problem, float(budget), seed=sub,
                                       num_reads=reads_per_call), backend)
            rep = decode(problem, out.best)
            if rep.valid:
                actions.append(rep.path.action)
        if not actions:
            raise CalibrationError(
                f"budget {budget:.6g} produced no valid-topology outcome",
                budget=float(budget),
            )
        arr = np.asarray(actions)
        e_mean.append(float(arr.mean()))
        e_std.append(max(float(arr.std()), delta_floor))
        rate.append(len(actions) / reads_per_budget)
        n_valid.append(len(actions))
        n_att.append(reads_per_budget)
    return Calibration(
        budgets=budgets,
        e_mean=np.asarray(e_mean),
        e_std=np.asarray(e_std),
        success_rate=np.asarray(rate),
        n_valid=np.asarray(n_valid, dtype=int),
        n_attempts=np.asarray(n_att, dtype=int),
        delta_floor=delta_floor,
    )


def log_outcome_density(cal: Calibration, energy: float, budget: float) -> float:
    """log P(E | budget) under the interpolated Gaussian surrogate."""
    mean, std = cal.params_at(budget)
    z = (energy - mean) / std
    return -0.5 * z * z - 0.5 * np.log(2.0 * np.pi) - np.log(std)


def outcome_density(cal: Calibration, energy: float, budget: float) -> float:
    """P(E | budget): Gaussian with budget-interpolated mean and std."""
    return float(np.exp(log_outcome_density(cal, energy, budget)))

"""Overdamped Langevin dynamics and its path-action effective potential.

The integrator is Euler-Maruyama for

    dQ = -(1 / m gamma) grad U(Q) dt + sqrt(2 D) dW,   D = kT / (m gamma),

which is the overdamped limit with the noise fixed by fluctuation-
dissipation. The class of stochastic paths of this dynamics admits an
imaginary-time quantum rewriting whose potential term,

    V_eff(Q) = (1 / 2 m gamma^2) * (|grad U|^2 - hbar_eff gamma lap U),

with hbar_eff = 2 kT / gamma, drives all edge weights downstream.

Random streams are counter-based (Philox) and spawned from a single
SeedSequence so concurrent bursts stay reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CapabilityError, IntegrationError, ValidationError
from .potentials import Potential


def rng_from_seed(seed) -> np.random.Generator:
    """Philox generator for a seed or SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def spawn_rngs(seed, n: int) -> list[np.random.Generator]:
    """n independent Philox streams split off one seed."""
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.Generator(np.random.Philox(s)) for s in root.spawn(n)]


@dataclass(frozen=True)
class LangevinParams:
    """Physical constants of the overdamped dynamics.

    All strictly positive. Derived quantities: diffusion coefficient
    D = kbt / (mass * gamma) and hbar_eff = 2 * kbt / gamma.
    """

    mass: float = 1.0
    gamma: float = 1.0
    kbt: float = 1.0
    dt: float = 0.01
    dim: int = 2
    n_atoms: int = 1

    def __post_init__(self):
        for name in ("mass", "gamma", "kbt", "dt"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"LangevinParams.{name} must be > 0")
        if self.dim < 1 or self.n_atoms < 1:
            raise ValidationError("LangevinParams dim and n_atoms must be >= 1")

    @property
    def diffusion(self) -> float:
        return self.kbt / (self.mass * self.gamma)

    @property
    def hbar_eff(self) -> float:
        return 2.0 * self.kbt / self.gamma

    def to_dict(self) -> dict:
        return {
            "mass": self.mass,
            "gamma": self.gamma,
            "kbt": self.kbt,
            "dt": self.dt,
            "dim": self.dim,
            "n_atoms": self.n_atoms,
        }


@dataclass
class Configuration:
    """A point in configuration space with cached energy/force data."""

    q: np.ndarray
    energy: float | None = None
    grad: np.ndarray | None = None

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)


@dataclass
class Trajectory:
    """Uniformly spaced Langevin trajectory plus the seed that made it."""

    times: np.ndarray
    points: np.ndarray            # (n_steps + 1, dim)
    energies: np.ndarray          # (n_steps + 1,)
    seed: object = None

    def __post_init__(self):
        dt = np.diff(self.times)
        if len(self.times) != len(self.points):
            raise ValidationError("trajectory times and points disagree in length")
        if len(dt) and (np.any(dt <= 0) or not np.allclose(dt, dt[0], rtol=1e-9)):
            raise ValidationError("trajectory time stamps must increase uniformly")

    def __len__(self):
        return len(self.times)

    def config(self, i: int) -> Configuration:
        return Configuration(self.points[i], energy=float(self.energies[i]))

    def to_csv(self, path):
        """Write `t,x0,...,x{d-1}` rows."""
        d = self.points.shape[1]
        header = ",".join(["t"] + [f"x{i}" for i in range(d)])
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for t, row in zip(self.times, self.points):
                fh.write(",".join(repr(float(v)) for v in (t, *row)) + "\n")


def _evaluate(q: np.ndarray, potential: Potential):
    energy = potential.energy(q)
    grad = potential.gradient(q)
    if not np.isfinite(energy) or not np.all(np.isfinite(grad)):
        raise IntegrationError(
            f"non-finite energy or gradient at q={q.tolist()}", point=q.copy()
        )
    return energy, grad


def step(
    q: Configuration,
    potential: Potential,
    lp: LangevinParams,
    rng: np.random.Generator,
) -> Configuration:
    """One Euler-Maruyama update.

    q' = q - (dt / m gamma) grad U(q) + sqrt(2 D dt) xi,  xi ~ N(0, 1)^d.
    """
    x = np.asarray(q.q, dtype=float)
    if not np.all(np.isfinite(x)):
        raise IntegrationError("non-finite starting point", point=x.copy())
    if q.grad is None or q.energy is None:
        _, grad = _evaluate(x, potential)
    else:
        grad = q.grad
    xi = rng.standard_normal(lp.dim)
    x_new = x - (lp.dt / (lp.mass * lp.gamma)) * grad + np.sqrt(2.0 * lp.diffusion * lp.dt) * xi
    energy_new, grad_new = _evaluate(x_new, potential)
    return Configuration(x_new, energy=energy_new, grad=grad_new)


def burst(
    q0: Configuration,
    n_steps: int,
    potential: Potential,
    lp: LangevinParams,
    rng: np.random.Generator,
    seed_label=None,
) -> Trajectory:
    """n_steps sequential updates from q0; returns n_steps + 1 points."""
    if n_steps < 1:
        raise ValidationError("burst requires n_steps >= 1")
    x = np.asarray(q0.q, dtype=float)
    energy, grad = _evaluate(x, potential)
    points = np.empty((n_steps + 1, lp.dim))
    energies = np.empty(n_steps + 1)
    points[0] = x
    energies[0] = energy
    current = Configuration(x, energy=energy, grad=grad)
    for k in range(n_steps):
        try:
            current = step(current, potential, lp, rng)
        except IntegrationError as err:
            err.step_index = k
            raise
        points[k + 1] = current.q
        energies[k + 1] = current.energy
    times = lp.dt * np.arange(n_steps + 1)
    return Trajectory(times=times, points=points, energies=energies, seed=seed_label)


def effective_potential(q: Configuration, potential: Potential, lp: LangevinParams) -> float:
    """V_eff(q) = (1 / 2 m gamma^2) [ |grad U|^2 - hbar_eff gamma lap U ]."""
    x = np.asarray(q.q, dtype=float)
    grad = potential.gradient(x)
    try:
        lap = potential.laplacian(x)
    except NotImplementedError as err:
        raise CapabilityError(
            f"potential kind {potential.kind!r} provides no Laplacian"
        ) from err
    g2 = float(np.dot(grad, grad))
    return (g2 - lp.hbar_eff * lp.gamma * lap) / (2.0 * lp.mass * lp.gamma**2)


def smooth_effective_potential(values, neighborhoods) -> np.ndarray:
    """Self-average a per-node field over given index neighborhoods.

    Each output is the arithmetic mean of the raw values across the
    node's neighborhood; idempotent on constant fields. Every node must
    appear in its own neighborhood.
    """
    values = np.asarray(values, dtype=float)
    out = np.empty_like(values)
    for i, nbrs in enumerate(neighborhoods):
        idx = np.asarray(list(nbrs), dtype=int)
        if idx.size == 0:
            raise ValidationError(f"empty smoothing neighborhood for node {i}")
        if i not in idx:
            raise ValidationError(f"smoothing neighborhood of node {i} must contain itself")
        out[i] = values[idx].mean()
    return out

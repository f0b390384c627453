"""Run configuration: one JSON file drives every pipeline stage.

Sections mirror the module config types and are validated eagerly, so a
bad field fails before any stage runs. The full config dict plus its
hash is echoed into every output artifact; downstream stages refuse
upstream artifacts whose hash disagrees with the config they were given.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .dynamics import LangevinParams
from .errors import ProvenanceError, ValidationError
from .graph import GraphConfig
from .manifold import ExploreConfig
from .potentials import Potential, make_potential
from .tps import ChainConfig


class ConfigError(ValidationError):
    """Malformed or missing configuration input."""


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def config_hash(doc) -> str:
    return hashlib.sha256(canonical_json(doc).encode()).hexdigest()


@dataclass
class AnnealerSettings:
    backend: str = "local"
    kappa: float = 2.0
    t_hot: float | None = None
    t_cold: float = 0.05
    init_ones_prob: float = 0.25
    alpha: float | None = None
    budgets: list = field(default_factory=lambda: [30.0, 90.0, 150.0, 210.0, 270.0])
    reads_per_budget: int = 40

    def __post_init__(self):
        if self.backend not in ("local", "remote"):
            raise ConfigError(f"annealer.backend must be 'local' or 'remote', got {self.backend!r}")
        if len(self.budgets) < 1 or any(b <= 0 for b in self.budgets):
            raise ConfigError("annealer.budgets must be positive")
        if sorted(self.budgets) != list(self.budgets):
            raise ConfigError("annealer.budgets must be increasing")


@dataclass
class TpsSettings:
    chain: ChainConfig
    n_chains: int = 1
    initial_budgets: list | None = None

    def __post_init__(self):
        if self.n_chains < 1:
            raise ConfigError("tps.n_chains must be >= 1")
        if self.initial_budgets is not None and len(self.initial_budgets) != self.n_chains:
            raise ConfigError("tps.initial_budgets must list one budget per chain")


@dataclass
class RunConfig:
    raw: dict
    seed: int
    potential: Potential
    langevin: LangevinParams
    explore: ExploreConfig
    basin_seeds: list
    graph: GraphConfig
    annealer: AnnealerSettings
    tps: TpsSettings
    max_lag: int | None = None

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    def provenance(self) -> dict:
        return {"config": self.raw, "config_hash": self.hash, "seed": self.seed}


def _section(doc: dict, name: str) -> dict:
    sec = doc.get(name)
    if sec is None:
        raise ConfigError(f"config is missing the {name!r} section")
    if not isinstance(sec, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    return sec


def load_config(path_or_doc) -> RunConfig:
    """Parse and validate every section of a run configuration."""
    if isinstance(path_or_doc, dict):
        doc = path_or_doc
    else:
        try:
            with open(path_or_doc) as fh:
                doc = json.load(fh)
        except FileNotFoundError as err:
            raise ConfigError(f"config file not found: {path_or_doc}") from err
        except json.JSONDecodeError as err:
            raise ConfigError(f"config file is not valid JSON: {err}") from err

    seed = doc.get("seed")
    if not isinstance(seed, int):
        raise ConfigError("config requires an integer top-level 'seed'")

    dyn = _section(doc, "dynamics")
    pot_sec = dyn.get("potential") or {}
    try:
        potential = make_potential(pot_sec.get("kind", ""), pot_sec.get("params"))
        langevin = LangevinParams(**dyn.get("langevin", {}))
    except (TypeError, ValidationError) as err:
        raise ConfigError(f"dynamics section invalid: {err}") from err

    man = _section(doc, "manifold")
    basin_seeds = man.get("seeds")
    if not basin_seeds or len(basin_seeds) != 2:
        raise ConfigError("manifold.seeds must give exactly two basin seeds")
    basin_seeds = [np.asarray(s, dtype=float) for s in basin_seeds]
    explore_kwargs = {k: v for k, v in man.items() if k != "seeds"}
    try:
        explore = ExploreConfig(seed=seed, **explore_kwargs)
    except (TypeError, ValidationError) as err:
        raise ConfigError(f"manifold section invalid: {err}") from err

    gra = _section(doc, "graph")
    try:
        graph_cfg = GraphConfig(diffusion=langevin.diffusion, **gra)
    except (TypeError, ValidationError) as err:
        raise ConfigError(f"graph section invalid: {err}") from err

    ann = _section(doc, "annealer")
    try:
        annealer = AnnealerSettings(**ann)
    except TypeError as err:
        raise ConfigError(f"annealer section invalid: {err}") from err

    tp = dict(_section(doc, "tps"))
    n_chains = tp.pop("n_chains", 1)
    initial_budgets = tp.pop("initial_budgets", None)
    try:
        chain_cfg = ChainConfig(seed=seed, **tp)
        tps_settings = TpsSettings(chain=chain_cfg, n_chains=n_chains,
                                   initial_budgets=initial_budgets)
    except (TypeError, ValidationError) as err:
        raise ConfigError(f"tps section invalid: {err}") from err

    max_lag = doc.get("analysis", {}).get("max_lag")

    return RunConfig(
        raw=doc,
        seed=seed,
        potential=potential,
        langevin=langevin,
        explore=explore,
        basin_seeds=basin_seeds,
        graph=graph_cfg,
        annealer=annealer,
        tps=tps_settings,
        max_lag=max_lag,
    )


def check_provenance(artifact: dict, cfg: RunConfig, what: str):
    """Refuse artifacts produced under a different configuration."""
    echo = artifact.get("config_echo") or {}
    found = echo.get("config_hash")
    if found != cfg.hash:
        raise ProvenanceError(
            f"{what} was produced with config hash {found}, current config hashes to "
            f"{cfg.hash}; regenerate the artifact or restore the config"
        )

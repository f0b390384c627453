"""Command-line pipeline: explore -> graph -> calibrate -> sample -> analyze.

Every command reads the same JSON config plus the upstream artifacts it
declares, writes only into --out, and embeds the config echo (full
config dict, hash, seed) into each artifact for provenance. `oracle`
produces exact references (brute-force ground state, enumerated path
law, minimum-action path) for graphs small enough to enumerate.

Exit codes: 0 success, 2 usage/config, 3 numeric/validation,
4 remote backend.  Remote backend endpoint and token come from the
QTPS_ANNEALER_URL / QTPS_ANNEALER_TOKEN environment variables.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, annealer, graph as graphmod, manifold, qubo, tps
from .config import ConfigError, RunConfig, check_provenance, load_config
from .errors import AnnealerError, EnumerationLimitError, QtpsError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_REMOTE = 4

ENV_URL = "QTPS_ANNEALER_URL"
ENV_TOKEN = "QTPS_ANNEALER_TOKEN"


def _load_json(path: Path, what: str) -> dict:
    if not path.exists():
        raise ConfigError(f"missing {what}: {path}")
    with open(path) as fh:
        return json.load(fh)


def _write_json(path: Path, doc: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh)


def make_backend(cfg: RunConfig):
    a = cfg.annealer
    if a.backend == "local":
        return annealer.SimulatedAnnealingBackend(
            kappa=a.kappa, t_hot=a.t_hot, t_cold=a.t_cold,
            init_ones_prob=a.init_ones_prob,
        )
    url = os.environ.get(ENV_URL)
    if not url:
        raise ConfigError(f"remote backend selected but {ENV_URL} is not set")
    return annealer.RemoteQuboBackend(url, auth_token=os.environ.get(ENV_TOKEN))


def cmd_explore(cfg: RunConfig, out: Path) -> Path:
    result = manifold.explore(cfg.potential, cfg.langevin, cfg.basin_seeds, cfg.explore)
    doc = result.cloud.to_json()
    doc["config_echo"] = cfg.provenance()
    doc["converged"] = bool(result.converged)
    doc["iterations"] = int(result.iterations)
    doc["min_cross_distance"] = float(result.min_cross_distance)
    target = out / "cloud.json"
    _write_json(target, doc)
    if not result.converged:
        print(f"warning: exploration hit the iteration cap without basin overlap "
              f"(min cross distance {result.min_cross_distance:.4g})", file=sys.stderr)
    print(f"explore: {len(result.cloud)} points, converged={result.converged} -> {target}")
    return target


def build_graph(cfg: RunConfig, cloud: manifold.PointCloud) -> graphmod.TransitionGraph:
    """Cloud -> embedding -> reduced nodes -> edges -> weighted graph."""
    embedding = manifold.diffusion_map(cloud, n_keep=max(2, cfg.explore.n_keep))
    nodes = graphmod.reduce(cloud, embedding, cfg.graph, cfg.basin_seeds)
    gcfg = graphmod.resolve_auto_timescale(cfg.graph, nodes, cfg.langevin.dim)
    edges = graphmod.connect(nodes, gcfg)
    graphmod.attach_effective_potential(nodes, cfg.potential, cfg.langevin, gcfg)
    return graphmod.weigh(nodes, edges, gcfg, n_atoms=cfg.langevin.n_atoms,
                          config_echo=cfg.provenance())


def cmd_graph(cfg: RunConfig, cloud_path: Path, out: Path) -> Path:
    doc = _load_json(cloud_path, "cloud artifact")
    check_provenance(doc, cfg, "cloud artifact")
    cloud = manifold.PointCloud.from_json(doc)
    g = build_graph(cfg, cloud)
    target = out / "graph.json"
    _write_json(target, g.to_json())
    print(f"graph: nu={g.n_nodes} |E|={g.n_edges} s={g.s} t={g.t} -> {target}")
    return target


def _load_graph(cfg: RunConfig, graph_path: Path) -> graphmod.TransitionGraph:
    doc = _load_json(graph_path, "graph artifact")
    check_provenance(doc, cfg, "graph artifact")
    return graphmod.TransitionGraph.from_json(doc)


def cmd_calibrate(cfg: RunConfig, graph_path: Path, out: Path) -> Path:
    g = _load_graph(cfg, graph_path)
    problem = qubo.encode(g, alpha=cfg.annealer.alpha)
    backend = make_backend(cfg)
    cal = annealer.calibrate(problem, cfg.annealer.budgets, cfg.annealer.reads_per_budget,
                             backend, seed=cfg.seed)
    doc = cal.to_json()
    doc["config_echo"] = cfg.provenance()
    target = out / "calibration.json"
    _write_json(target, doc)
    print(f"calibrate: overall success rate {cal.overall_success_rate():.3f} -> {target}")
    return target


def cmd_sample(cfg: RunConfig, graph_path: Path, cal_path: Path, out: Path) -> list:
    g = _load_graph(cfg, graph_path)
    cal_doc = _load_json(cal_path, "calibration artifact")
    check_provenance(cal_doc, cfg, "calibration artifact")
    cal = annealer.Calibration.from_json(cal_doc)
    problem = qubo.encode(g, alpha=cfg.annealer.alpha)
    backend = make_backend(cfg)

    base = cfg.tps.chain
    chain_seeds = [int(s.generate_state(1)[0] % (2**31 - 1))
                   for s in np.random.SeedSequence(cfg.seed).spawn(cfg.tps.n_chains)]
    written = []
    for c in range(cfg.tps.n_chains):
        init_budget = (cfg.tps.initial_budgets[c]
                       if cfg.tps.initial_budgets is not None else base.start_budget)
        chain_cfg = tps.ChainConfig(
            t0=base.t0, k=base.k, dt_prop=base.dt_prop, n_steps=base.n_steps,
            seed=chain_seeds[c], initial_budget=init_budget,
            reads_per_step=base.reads_per_step,
            max_init_attempts=base.max_init_attempts,
        )
        result = tps.run_chain(g, problem, cal, backend, chain_cfg)
        csv_path = out / f"chain_{c}.csv"
        result.to_csv(csv_path)
        sidecar = result.to_sidecar_json()
        sidecar["config_echo"] = cfg.provenance()
        _write_json(out / f"chain_{c}_paths.json", sidecar)
        written.append(csv_path)
        s = result.summary
        print(f"sample: chain {c}: steps={s.steps} accepted={s.accepted} "
              f"rejected={s.rejected} wrong-topology={s.wrong_topology} "
              f"backend-failures={s.backend_failures}")
    return written


def _load_chains(cfg: RunConfig, chains_dir: Path):
    paths = sorted(chains_dir.glob("chain_*_paths.json"))
    if not paths:
        raise ConfigError(f"no chain sidecar files (chain_*_paths.json) under {chains_dir}")
    chains = []
    for p in paths:
        doc = _load_json(p, "chain artifact")
        check_provenance(doc, cfg, f"chain artifact {p.name}")
        records = []
        for st in doc["steps"]:
            records.append(tps.ChainRecord(
                step=int(st["step"]),
                proposed_budget=float(st["proposed_budget"]),
                outcome=tps.Outcome(st["outcome"]),
                proposed_action=st["proposed_action"],
                accept_prob=st["accept_prob"],
                proposed_path=None if st["proposed_path"] is None else tuple(st["proposed_path"]),
                current_path=tuple(st["path"]),
                current_action=float(st["action"]),
                current_budget=float(st["t_sweep"]),
            ))
        chains.append(records)
    return chains


def cmd_analyze(cfg: RunConfig, graph_path: Path, cal_path: Path, chains_dir: Path, out: Path) -> Path:
    g = _load_graph(cfg, graph_path)
    cal = None
    if cal_path is not None and cal_path.exists():
        cal_doc = _load_json(cal_path, "calibration artifact")
        check_provenance(cal_doc, cfg, "calibration artifact")
        cal = annealer.Calibration.from_json(cal_doc)
    chains = _load_chains(cfg, chains_dir)
    best = graphmod.dijkstra(g)
    bundle = analysis.report(g, chains, cal, best, max_lag=cfg.max_lag)
    doc = bundle.to_json()
    doc["config_echo"] = cfg.provenance()
    target = out / "report.json"
    _write_json(target, doc)
    for c in range(len(chains)):
        bundle.autocorrelation_csv(out / f"autocorrelation_{c}.csv", chain_index=c)
    bundle.density_csv(out / "density.csv")
    for c, ac in enumerate(bundle.autocorrelation):
        g1 = ac["G_over_G0"][1] if len(ac["G_over_G0"]) > 1 else float("nan")
        print(f"analyze: chain {c}: G(1)/G(0) = {g1:.4f}")
    print(f"analyze: density corridor overlap {bundle.density_argmax_near_path:.3f} -> {target}")
    return target


def cmd_oracle(cfg: RunConfig, graph_path: Path, out: Path) -> Path:
    g = _load_graph(cfg, graph_path)
    problem = qubo.encode(g, alpha=cfg.annealer.alpha)
    if problem.num_bits > 24:
        raise EnumerationLimitError(
            f"oracle refuses {problem.num_bits} bits (> 24); use a smaller graph"
        )
    ground = qubo.brute_force_ground(problem)
    rep = qubo.decode(problem, ground)
    ensemble = qubo.enumerate_paths(g)
    best = graphmod.dijkstra(g)
    doc = {
        "config_echo": cfg.provenance(),
        "ground_state": {
            "bits": [int(b) for b in ground.bits],
            "energy": float(ground.energy),
            "valid": bool(rep.valid),
            "path": None if rep.path is None else list(map(int, rep.path.nodes)),
            "action": None if rep.path is None else float(rep.path.action),
        },
        "dijkstra": {"path": list(map(int, best.nodes)), "action": float(best.action)},
        "path_law": {
            "paths": [list(map(int, p.nodes)) for p in ensemble.paths],
            "actions": [float(p.action) for p in ensemble.paths],
            "probabilities": [float(v) for v in ensemble.probabilities],
        },
    }
    target = out / "oracle.json"
    _write_json(target, doc)
    print(f"oracle: ground action {doc['ground_state']['action']} over "
          f"{len(ensemble)} paths -> {target}")
    return target


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qtps",
        description="Transition path sampling over a coarse-grained graph "
                    "with an annealer backend and Metropolis correction.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, **inputs):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="run configuration JSON")
        p.add_argument("--out", required=True, help="output directory")
        for flag, help_str in inputs.items():
            p.add_argument(f"--{flag}", required=True, help=help_str)
        return p

    add("explore", "sample the landscape and write the point cloud")
    add("graph", "reduce the cloud to a weighted transition graph", cloud="cloud JSON")
    add("calibrate", "estimate P(E|t_sweep) on the budget grid", graph="graph JSON")
    add("sample", "run the hybrid Metropolis chains",
        graph="graph JSON", calibration="calibration JSON")
    add("analyze", "autocorrelation, density, and summary tables",
        graph="graph JSON", calibration="calibration JSON", chains="directory with chain sidecars")
    add("oracle", "exact references for enumerable graphs", graph="graph JSON")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "explore":
            cmd_explore(cfg, out)
        elif args.command == "graph":
            cmd_graph(cfg, Path(args.cloud), out)
        elif args.command == "calibrate":
            cmd_calibrate(cfg, Path(args.graph), out)
        elif args.command == "sample":
            cmd_sample(cfg, Path(args.graph), Path(args.calibration), out)
        elif args.command == "analyze":
            cmd_analyze(cfg, Path(args.graph), Path(args.calibration), Path(args.chains), out)
        elif args.command == "oracle":
            cmd_oracle(cfg, Path(args.graph), out)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except AnnealerError as err:
        print(f"remote backend error: {err}", file=sys.stderr)
        return EXIT_REMOTE
    except QtpsError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Post-chain statistics: decorrelation, path density, summary bundle.

The chain's state sequence (the retained path at every step, repeats
included) is re-expressed as a binary edge-occupation matrix. Its
autocorrelation,

    G(N) = (1/|E|) sum_e [ (1/N_MC) sum_k e(k+N) e(k) - mean_e^2 ],

uses periodic wrap in k, so G is the circular autocovariance of each
edge indicator averaged over edges. G(0) vanishes exactly when the
chain never changed state.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .annealer import Calibration
from .errors import ValidationError
from .graph import CoarsePath, TransitionGraph


@dataclass
class EdgeOccupationSeries:
    """Per-step edge indicator vectors of a chain's state sequence."""

    indicators: np.ndarray        # (n_steps, n_edges) of 0/1
    n_edges: int

    def __post_init__(self):
        self.indicators = np.asarray(self.indicators, dtype=np.uint8)
        if self.indicators.ndim != 2 or self.indicators.shape[1] != self.n_edges:
            raise ValidationError("indicator matrix shape mismatch")

    @property
    def n_steps(self) -> int:
        return self.indicators.shape[0]


def edge_occupation(records, g: TransitionGraph) -> EdgeOccupationSeries:
    """Occupation matrix from chain records (one row per step's state)."""
    eidx = g.edge_index()
    mat = np.zeros((len(records), g.n_edges), dtype=np.uint8)
    for k, rec in enumerate(records):
        nodes = rec.current_path if hasattr(rec, "current_path") else rec
        for a, b in zip(nodes[:-1], nodes[1:]):
            key = (a, b) if a < b else (b, a)
            mat[k, eidx[key]] = 1
    return EdgeOccupationSeries(indicators=mat, n_edges=g.n_edges)


def autocorrelation(series: EdgeOccupationSeries, max_lag: int) -> np.ndarray:
    """G(0..max_lag) with periodic boundary conditions.

    Computed per edge as the circular autocovariance of the demeaned
    indicator (FFT route), then averaged over edges.
    """
    n = series.n_steps
    if n < 2:
        raise ValidationError("autocorrelation needs at least two steps")
    if not (0 <= max_lag < n):
        raise ValidationError("max_lag must satisfy 0 <= max_lag < n_steps")
    x = series.indicators.astype(float)
    x -= x.mean(axis=0, keepdims=True)
    spec = np.fft.rfft(x, axis=0)
    circ = np.fft.irfft(spec * np.conj(spec), n=n, axis=0) / n   # (n, |E|)
    g = circ.mean(axis=1)
    return g[: max_lag + 1].copy()


def path_density(records, g: TransitionGraph) -> np.ndarray:
    """Fraction of chain states whose path visits each node.

    A node appearing multiple times in one path counts once; both
    endpoints therefore have density exactly one.
    """
    if len(records) == 0:
        raise ValidationError("path_density needs at least one record")
    counts = np.zeros(g.n_nodes)
    for rec in records:
        nodes = rec.current_path if hasattr(rec, "current_path") else rec
        for n in set(nodes):
            counts[n] += 1
    return counts / len(records)


@dataclass
class ReportBundle:
    """Calibration summary, per-chain summaries, G(N) series, density table."""

    calibration_summary: dict
    chain_summaries: list
    autocorrelation: list          # per chain: {"lag": [...], "G": [...], "G_over_G0": [...]}
    density: np.ndarray
    dijkstra_nodes: tuple
    density_argmax_near_path: float   # fraction of top-decile nodes within graph distance 1

    def to_json(self, path=None):
        doc = {
            "calibration_summary": self.calibration_summary,
            "chain_summaries": self.chain_summaries,
            "autocorrelation": self.autocorrelation,
            "density": [float(v) for v in self.density],
            "dijkstra_path": list(map(int, self.dijkstra_nodes)),
            "density_argmax_near_path": float(self.density_argmax_near_path),
        }
        if path is None:
            return doc
        with open(path, "w") as fh:
            json.dump(doc, fh)
        return doc

    def autocorrelation_csv(self, path, chain_index: int = 0):
        doc = self.autocorrelation[chain_index]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["lag", "G", "G_over_G0"])
            for lag, g, r in zip(doc["lag"], doc["G"], doc["G_over_G0"]):
                writer.writerow([lag, repr(g), repr(r)])

    def density_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["node", "density"])
            for n, d in enumerate(self.density):
                writer.writerow([n, repr(float(d))])


def _graph_distance_leq1(g: TransitionGraph, targets) -> set:
    """Nodes at graph distance <= 1 from any node in targets."""
    near = set(int(t) for t in targets)
    adj = g.adjacency()
    for t in targets:
        for v, _ in adj[int(t)]:
            near.add(v)
    return near


def report(
    g: TransitionGraph,
    chains,
    cal: Calibration | None,
    dijkstra_path: CoarsePath,
    max_lag: int | None = None,
) -> ReportBundle:
    """Bundle the standard post-run tables.

    chains: one list of ChainRecords per independent chain (a single
    record list is also accepted). Autocorrelation is reported per
    chain, never averaged across chains.
    """
    if chains and hasattr(chains[0], "current_path"):
        chains = [chains]
    if not chains or any(len(c) == 0 for c in chains):
        raise ValidationError("report requires at least one non-empty chain")

    chain_summaries = []
    autocorr = []
    all_records = []
    for records in chains:
        outcomes = [r.outcome.value for r in records]
        chain_summaries.append({
            "steps": len(records),
            "accepted": outcomes.count("accepted"),
            "rejected": outcomes.count("rejected"),
            "wrong_topology": outcomes.count("wrong-topology"),
            "backend_failures": outcomes.count("backend-failure"),
        })
        series = edge_occupation(records, g)
        lag_cap = max_lag if max_lag is not None else min(len(records) - 1, len(records) // 4)
        lag_cap = max(1, lag_cap)
        gvals = autocorrelation(series, lag_cap)
        g0 = gvals[0]
        ratios = (gvals / g0).tolist() if g0 > 0 else [1.0] + [0.0] * lag_cap
        autocorr.append({
            "lag": list(range(lag_cap + 1)),
            "G": gvals.tolist(),
            "G_over_G0": ratios,
        })
        all_records.extend(records)

    density = path_density(all_records, g)

    # fraction of top-decile-density nodes within graph distance 1 of the
    # reference minimum-action path
    order = np.argsort(density)[::-1]
    n_top = max(1, int(np.ceil(0.1 * g.n_nodes)))
    top_nodes = order[:n_top]
    near = _graph_distance_leq1(g, dijkstra_path.nodes)
    frac = sum(1 for n in top_nodes if int(n) in near) / n_top

    cal_summary = {}
    if cal is not None:
        cal_summary = {
            "budgets": [float(b) for b in cal.budgets],
            "e_mean": [float(v) for v in cal.e_mean],
            "e_std": [float(v) for v in cal.e_std],
            "success_rate": [float(v) for v in cal.success_rate],
            "n_attempts": int(cal.n_attempts.sum()),
            "n_valid": int(cal.n_valid.sum()),
            "overall_success_rate": cal.overall_success_rate(),
        }

    return ReportBundle(
        calibration_summary=cal_summary,
        chain_summaries=chain_summaries,
        autocorrelation=autocorr,
        density=density,
        dijkstra_nodes=tuple(dijkstra_path.nodes),
        density_argmax_near_path=frac,
    )

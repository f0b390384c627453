"""Coarse-grained transition graph over the explored manifold.

Pipeline: `reduce` thins the explored cloud to a sparse, kinetically
uniform node set (energy-quantile filter followed by a greedy walk in
diffusion-coordinate space); `connect` links nodes that are close both
in diffusion distance and in configuration space; `weigh` assigns each
edge a path-action weight and renormalizes by the largest weight so all
edges are of order one.

Two weight forms are supported. The default Hamilton-Jacobi form

    w_ij = |Q_i - Q_j| / (2 sqrt(D)) * (L_i + L_j),
    L_i  = sqrt(Cv * Veff_s(Q_i) + s0),

discretizes the frequency-regularized action along the edge; the
time-local form

    w_ij = Ct (Q_i - Q_j)^2 / (4 D dt) + Cv Veff_s(Q_i) dt

is node-asymmetric and gets symmetrized by averaging, since the graph
is undirected. The action of a path is the sum of its edge weights.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from . import dynamics
from .dynamics import Configuration, LangevinParams
from .errors import (
    DegenerateEndpointsError,
    GraphConnectivityError,
    NoPathError,
    ValidationError,
    WeightConfigError,
)
from .manifold import DiffusionEmbedding, PointCloud
from .potentials import Potential

HAMILTON_JACOBI = "hamilton-jacobi"
TIME_LOCAL = "time-local"


@dataclass
class GraphConfig:
    """Thresholds and weight parameters of the graph construction.

    None-valued entries are resolved against the data: c_t defaults to
    1/n_atoms, c_v is scaled so the median |Cv * Veff * dt| is one, and
    s0 keeps every Hamilton-Jacobi radicand positive.
    """

    energy_quantile: float = 0.5
    d_diff_thresh: float | str = 1e-3   # or "auto": 98th pct of nn diffusion distances
    diff_edge_cutoff: float | str = 0.01    # or "auto": 1.25x the largest nn distance
    cart_edge_cutoff: float | str = 0.5     # likewise, in configuration space
    weight_form: str = HAMILTON_JACOBI
    s0: float | None = None
    delta_t: float | str = 1.0      # seconds, or "auto" for the diffusion-time heuristic
    sigma: float | None = None
    c_t: float | None = None
    c_v: float | None = None
    diffusion: float = 1.0
    smooth_radius: float | None = None     # diffusion-space ball; None: diff_edge_cutoff

    def __post_init__(self):
        if self.weight_form not in (HAMILTON_JACOBI, TIME_LOCAL):
            raise ValidationError(f"unknown weight form {self.weight_form!r}")
        if not (0.0 <= self.energy_quantile <= 1.0):
            raise ValidationError("energy_quantile must lie in [0, 1]")
        if self.delta_t != "auto" and (not isinstance(self.delta_t, (int, float)) or self.delta_t <= 0):
            raise ValidationError("GraphConfig.delta_t must be > 0 or 'auto'")
        for name in ("d_diff_thresh", "diff_edge_cutoff", "cart_edge_cutoff"):
            val = getattr(self, name)
            if val != "auto" and (not isinstance(val, (int, float)) or val <= 0):
                raise ValidationError(f"GraphConfig.{name} must be > 0 or 'auto'")
        if self.diffusion <= 0:
            raise ValidationError("GraphConfig.diffusion must be > 0")
        for name in ("c_t", "c_v"):
            val = getattr(self, name)
            if val is not None and val <= 0:
                raise ValidationError(f"GraphConfig.{name} must be > 0 when given")

    def to_dict(self) -> dict:
        return {
            "energy_quantile": self.energy_quantile,
            "d_diff_thresh": self.d_diff_thresh,
            "diff_edge_cutoff": self.diff_edge_cutoff,
            "cart_edge_cutoff": self.cart_edge_cutoff,
            "weight_form": self.weight_form,
            "s0": self.s0,
            "delta_t": self.delta_t,
            "sigma": self.sigma,
            "c_t": self.c_t,
            "c_v": self.c_v,
            "diffusion": self.diffusion,
            "smooth_radius": self.smooth_radius,
        }


@dataclass
class NodeSet:
    """Reduced node set: configurations plus their diffusion coordinates."""

    coords: np.ndarray            # (nu, d) configurations
    dc: np.ndarray                # (nu, 2) first two diffusion coordinates
    energy: np.ndarray | None
    s: int
    t: int
    veff: np.ndarray | None = None   # smoothed effective potential per node

    def __len__(self):
        return self.coords.shape[0]


@dataclass(frozen=True)
class CoarsePath:
    """Ordered node-index sequence with its action."""

    nodes: tuple
    action: float

    def __len__(self):
        return len(self.nodes)


@dataclass
class TransitionGraph:
    """Weighted undirected graph with designated endpoints.

    edges holds (i, j) with i < j; weights and renormalized weights are
    aligned with it. The maximum renormalized weight is exactly 1.
    """

    coords: np.ndarray             # (nu, d)
    veff: np.ndarray               # (nu,) smoothed effective potential
    edges: list                    # [(i, j)] with i < j
    weights_raw: np.ndarray
    weights: np.ndarray            # renormalized, max exactly 1
    s: int
    t: int
    config_echo: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coords = np.atleast_2d(np.asarray(self.coords, dtype=float))
        self.veff = np.asarray(self.veff, dtype=float)
        self.weights_raw = np.asarray(self.weights_raw, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        self.validate()

    @property
    def n_nodes(self) -> int:
        return self.coords.shape[0]

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def validate(self):
        nu = self.n_nodes
        if not (0 <= self.s < nu and 0 <= self.t < nu) or self.s == self.t:
            raise ValidationError("endpoints must be distinct valid node ids")
        seen = set()
        for (i, j) in self.edges:
            if i == j:
                raise ValidationError(f"self-loop on node {i}")
            if not (0 <= i < j < nu):
                raise ValidationError(f"edge ({i},{j}) must satisfy 0 <= i < j < nu")
            if (i, j) in seen:
                raise ValidationError(f"duplicate edge ({i},{j})")
            seen.add((i, j))
        if len(self.weights_raw) != len(self.edges) or len(self.weights) != len(self.edges):
            raise ValidationError("edge/weight arrays misaligned")
        if self.n_edges:
            if np.any(self.weights_raw <= 0):
                raise ValidationError("all raw edge weights must be > 0")
            if self.weights.max() != 1.0:
                raise ValidationError("maximum renormalized weight must be exactly 1")
        comp = self.component_of(self.s)
        if self.t not in comp:
            raise GraphConnectivityError(
                "source and target are disconnected", components=self.components()
            )

    def adjacency(self) -> list:
        """adj[i] = list of (neighbor, edge_index)."""
        adj = [[] for _ in range(self.n_nodes)]
        for e, (i, j) in enumerate(self.edges):
            adj[i].append((j, e))
            adj[j].append((i, e))
        return adj

    def edge_index(self) -> dict:
        return {(i, j): e for e, (i, j) in enumerate(self.edges)}

    def component_of(self, start: int) -> set:
        adj = self.adjacency()
        seen = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for v, _ in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return seen

    def components(self) -> list:
        remaining = set(range(self.n_nodes))
        out = []
        while remaining:
            comp = self.component_of(next(iter(remaining)))
            comp &= remaining
            out.append(sorted(comp))
            remaining -= comp
        return out

    def path_action(self, nodes, renormalized: bool = True) -> float:
        """Sum of edge weights along a node sequence."""
        eidx = self.edge_index()
        w = self.weights if renormalized else self.weights_raw
        total = 0.0
        for a, b in zip(nodes[:-1], nodes[1:]):
            key = (a, b) if a < b else (b, a)
            if key not in eidx:
                raise ValidationError(f"no edge between {a} and {b}")
            total += float(w[eidx[key]])
        return total

    def to_json(self, path=None):
        doc = {
            "nodes": [
                {"id": i, "coords": [float(v) for v in self.coords[i]], "veff": float(self.veff[i])}
                for i in range(self.n_nodes)
            ],
            "edges": [
                {"i": int(i), "j": int(j), "w": float(self.weights_raw[e]), "w_renorm": float(self.weights[e])}
                for e, (i, j) in enumerate(self.edges)
            ],
            "s": int(self.s),
            "t": int(self.t),
            "config_echo": self.config_echo,
        }
        if path is None:
            return doc
        with open(path, "w") as fh:
            json.dump(doc, fh)
        return doc

    @classmethod
    def from_json(cls, source) -> "TransitionGraph":
        if isinstance(source, str):
            with open(source) as fh:
                doc = json.load(fh)
        elif hasattr(source, "read"):
            doc = json.load(source)
        else:
            doc = source
        nodes = sorted(doc["nodes"], key=lambda n: n["id"])
        coords = np.asarray([n["coords"] for n in nodes], dtype=float)
        veff = np.asarray([n["veff"] for n in nodes], dtype=float)
        edges = [(int(e["i"]), int(e["j"])) for e in doc["edges"]]
        w_raw = np.asarray([e["w"] for e in doc["edges"]], dtype=float)
        w_ren = np.asarray([e["w_renorm"] for e in doc["edges"]], dtype=float)
        return cls(coords, veff, edges, w_raw, w_ren, int(doc["s"]), int(doc["t"]),
                   config_echo=doc.get("config_echo", {}))


def from_weights(coords, edges, weights_raw, s, t, veff=None, config_echo=None) -> TransitionGraph:
    """Assemble a graph from explicit raw weights (fixtures, tests)."""
    weights_raw = np.asarray(weights_raw, dtype=float)
    if np.any(weights_raw <= 0):
        raise ValidationError("raw weights must be > 0")
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    if veff is None:
        veff = np.zeros(coords.shape[0])
    return TransitionGraph(
        coords=coords,
        veff=np.asarray(veff, dtype=float),
        edges=[(int(i), int(j)) if i < j else (int(j), int(i)) for i, j in edges],
        weights_raw=weights_raw,
        weights=weights_raw / weights_raw.max(),
        s=int(s),
        t=int(t),
        config_echo=dict(config_echo or {}),
    )


def reduce(
    cloud: PointCloud,
    embedding: DiffusionEmbedding,
    cfg: GraphConfig,
    endpoints,
) -> NodeSet:
    """Thin the cloud to a kinetically uniform node set.

    Keeps points at or below the energy quantile, then walks greedily in
    the plane of the first two diffusion coordinates: from the current
    point, the nearest survivor farther than d_diff_thresh becomes the
    next node and every closer survivor is discarded. The endpoint
    representatives (nearest cloud points to the two given
    configurations) are always present in the output.
    """
    if len(cloud) != embedding.n_points:
        raise ValidationError("cloud and embedding are misaligned")
    dc = embedding.coords(2)
    pts = cloud.points

    if cfg.energy_quantile < 1.0:
        if cloud.energy is None:
            raise ValidationError("energy-quantile filtering requires per-point energies")
        cutoff = np.quantile(cloud.energy, cfg.energy_quantile)
        kept = np.flatnonzero(cloud.energy <= cutoff)
    else:
        kept = np.arange(len(cloud))
    if kept.size < 2:
        raise ValidationError("energy filter left fewer than two points")

    qa = np.asarray(endpoints[0].q if isinstance(endpoints[0], Configuration) else endpoints[0], dtype=float)
    qb = np.asarray(endpoints[1].q if isinstance(endpoints[1], Configuration) else endpoints[1], dtype=float)
    a_rep = kept[np.argmin(cdist(qa[None, :], pts[kept])[0])]
    b_rep = kept[np.argmin(cdist(qb[None, :], pts[kept])[0])]
    if a_rep == b_rep:
        raise DegenerateEndpointsError("both endpoints map to the same reduced node")

    thresh = cfg.d_diff_thresh
    if thresh == "auto":
        # histogram heuristic: keep one representative per nearest-neighbor
        # cluster by cutting at the 98th percentile of nn diffusion distances
        d_all = cdist(dc[kept], dc[kept])
        np.fill_diagonal(d_all, np.inf)
        thresh = float(np.quantile(d_all.min(axis=1), 0.98))

    chain = [int(a_rep)]
    pool = [int(i) for i in kept if i != a_rep]
    cur = a_rep
    while pool:
        d = np.linalg.norm(dc[pool] - dc[cur], axis=1)
        far = d > thresh
        if not far.any():
            break
        pick = int(np.flatnonzero(far)[np.argmin(d[far])])
        nxt = pool[pick]
        chain.append(nxt)
        pool = [p for p, keep_it in zip(pool, far) if keep_it and p != nxt]
        cur = nxt
    if int(b_rep) not in chain:
        chain.append(int(b_rep))

    idx = np.asarray(chain, dtype=int)
    return NodeSet(
        coords=pts[idx].copy(),
        dc=dc[idx].copy(),
        energy=None if cloud.energy is None else cloud.energy[idx].copy(),
        s=0,
        t=int(np.flatnonzero(idx == b_rep)[0]),
    )


def connect(nodes: NodeSet, cfg: GraphConfig) -> list:
    """Edges between nodes close in both diffusion and Cartesian distance.

    Raises GraphConnectivityError (listing the components) when the two
    thresholds leave the endpoints disconnected.
    """
    nu = len(nodes)
    if nu < 2:
        raise ValidationError("need at least two nodes to connect")
    d_dc = cdist(nodes.dc, nodes.dc)
    d_xy = cdist(nodes.coords, nodes.coords)

    def base(d):
        dd = d.copy()
        np.fill_diagonal(dd, np.inf)
        return float(dd.min(axis=1).max())   # largest nearest-neighbor distance

    def connected(diff_cut, cart_cut):
        adj = (d_dc < diff_cut) & (d_xy < cart_cut)
        seen = {nodes.s}
        stack = [nodes.s]
        while stack:
            u = stack.pop()
            for v in np.flatnonzero(adj[u]):
                if v != u and v not in seen:
                    seen.add(int(v))
                    stack.append(int(v))
        return nodes.t in seen

    auto_dc = cfg.diff_edge_cutoff == "auto"
    auto_xy = cfg.cart_edge_cutoff == "auto"
    if auto_dc or auto_xy:
        # bottleneck search: smallest proportional scaling of the base
        # cutoffs that links s to t, then a 10% margin
        b_dc = base(d_dc) if auto_dc else float(cfg.diff_edge_cutoff)
        b_xy = base(d_xy) if auto_xy else float(cfg.cart_edge_cutoff)
        lam_hi = 1.0
        while lam_hi < 64.0 and not connected(
            b_dc * (lam_hi if auto_dc else 1.0), b_xy * (lam_hi if auto_xy else 1.0)
        ):
            lam_hi *= 1.3
        lo, hi = lam_hi / 1.3, lam_hi
        for _ in range(24):
            mid = 0.5 * (lo + hi)
            if connected(b_dc * (mid if auto_dc else 1.0), b_xy * (mid if auto_xy else 1.0)):
                hi = mid
            else:
                lo = mid
        diff_cut = b_dc * (1.1 * hi if auto_dc else 1.0)
        cart_cut = b_xy * (1.1 * hi if auto_xy else 1.0)
    else:
        diff_cut = float(cfg.diff_edge_cutoff)
        cart_cut = float(cfg.cart_edge_cutoff)
    edges = [
        (i, j)
        for i in range(nu)
        for j in range(i + 1, nu)
        if d_dc[i, j] < diff_cut and d_xy[i, j] < cart_cut
    ]
    # connectivity probe before weights exist
    adj = [[] for _ in range(nu)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = {nodes.s}
    stack = [nodes.s]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    if nodes.t not in seen:
        remaining = set(range(nu))
        comps = []
        while remaining:
            root = next(iter(remaining))
            comp = {root}
            stack = [root]
            while stack:
                u = stack.pop()
                for v in adj[u]:
                    if v not in comp:
                        comp.add(v)
                        stack.append(v)
            comps.append(sorted(comp))
            remaining -= comp
        raise GraphConnectivityError(
            f"edge cutoffs disconnect s={nodes.s} from t={nodes.t} "
            f"({len(comps)} components); relax diff/cart cutoffs",
            components=comps,
        )
    return edges


def attach_effective_potential(
    nodes: NodeSet,
    potential: Potential,
    lp: LangevinParams,
    cfg: GraphConfig,
) -> np.ndarray:
    """Evaluate V_eff at every node and self-average it in place.

    Smoothing neighborhoods are balls in diffusion-coordinate space of
    radius cfg.smooth_radius (default: the diffusion edge cutoff); every
    node belongs to its own neighborhood.
    """
    raw = np.array([
        dynamics.effective_potential(Configuration(q), potential, lp) for q in nodes.coords
    ])
    d_dc = cdist(nodes.dc, nodes.dc)
    radius = cfg.smooth_radius
    if radius is None:
        radius = cfg.diff_edge_cutoff
    if radius == "auto":
        dd = d_dc.copy()
        np.fill_diagonal(dd, np.inf)
        radius = 1.25 * float(dd.min(axis=1).max())
    neighborhoods = [np.flatnonzero(d_dc[i] <= radius) for i in range(len(nodes))]
    nodes.veff = dynamics.smooth_effective_potential(raw, neighborhoods)
    return nodes.veff


def estimate_sigma(coords: np.ndarray) -> float:
    """Spatial resolution: mean nearest-neighbor distance of the node set."""
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    d = cdist(coords, coords)
    np.fill_diagonal(d, np.inf)
    return float(d.min(axis=1).mean())


def estimate_delta_t(sigma: float, diffusion: float, dim: int) -> float:
    """Mean time to diffuse a distance sigma: sigma^2 / (2 d D).

    Heuristic stand-in for measuring the traversal time on short
    trajectories; adequate because only the order of magnitude enters
    the renormalized weights.
    """
    if sigma <= 0:
        raise ValidationError("sigma must be > 0")
    return sigma**2 / (2.0 * dim * diffusion)


def resolve_auto_timescale(cfg: GraphConfig, nodes: NodeSet, dim: int) -> GraphConfig:
    """Return a copy of cfg with delta_t/sigma resolved against the nodes."""
    from dataclasses import replace

    sigma = cfg.sigma if cfg.sigma is not None else estimate_sigma(nodes.coords)
    delta_t = cfg.delta_t
    if delta_t == "auto":
        delta_t = estimate_delta_t(sigma, cfg.diffusion, dim)
    return replace(cfg, sigma=sigma, delta_t=delta_t)


def hj_weight(qi, qj, li, lj, diffusion) -> float:
    """Hamilton-Jacobi edge weight |Qi - Qj| (Li + Lj) / (2 sqrt(D))."""
    return float(np.linalg.norm(np.asarray(qi, float) - np.asarray(qj, float))
                 / (2.0 * np.sqrt(diffusion)) * (li + lj))


def resolve_weight_params(nodes: NodeSet, cfg: GraphConfig, n_atoms: int = 1):
    """Fill in the data-dependent defaults for (c_t, c_v, s0)."""
    if nodes.veff is None:
        raise ValidationError("nodes carry no smoothed effective potential; "
                              "call attach_effective_potential first")
    if cfg.delta_t == "auto":
        raise ValidationError("delta_t is still 'auto'; call resolve_auto_timescale first")
    c_t = cfg.c_t if cfg.c_t is not None else 1.0 / n_atoms
    if cfg.c_v is not None:
        c_v = cfg.c_v
    else:
        med = float(np.median(np.abs(nodes.veff)))
        c_v = 1.0 / (med * cfg.delta_t) if med > 0 else 1.0
    if cfg.s0 is not None:
        s0 = cfg.s0
    else:
        vmin = float(np.min(c_v * nodes.veff))
        s0 = 1.1 * abs(vmin) if vmin < 0 else 0.1 / cfg.delta_t
    return c_t, c_v, s0


def weigh(nodes: NodeSet, edges: list, cfg: GraphConfig, n_atoms: int = 1,
          config_echo=None) -> TransitionGraph:
    """Assign raw and renormalized action weights to the edges."""
    c_t, c_v, s0 = resolve_weight_params(nodes, cfg, n_atoms)
    veff_reg = c_v * nodes.veff
    if cfg.weight_form == HAMILTON_JACOBI:
        radicand = veff_reg + s0
        if np.any(radicand <= 0):
            bad = int(np.argmin(radicand))
            need = float(-np.min(veff_reg)) * (1.0 + 1e-9)
            raise WeightConfigError(
                f"V_eff_reg + s0 <= 0 at node {bad}; raise s0 above {need:.6g}",
                node=bad,
                required_s0=need,
            )
        ell = np.sqrt(radicand)
        w_raw = np.array([
            hj_weight(nodes.coords[i], nodes.coords[j], ell[i], ell[j], cfg.diffusion)
            for i, j in edges
        ])
    else:
        w_raw = np.empty(len(edges))
        for e, (i, j) in enumerate(edges):
            dq2 = float(np.sum((nodes.coords[i] - nodes.coords[j]) ** 2))
            kin = c_t * dq2 / (4.0 * cfg.diffusion * cfg.delta_t)
            # node-asymmetric potential term, averaged for undirectedness
            pot = 0.5 * (veff_reg[i] + veff_reg[j]) * cfg.delta_t
            w_raw[e] = kin + pot
    if len(edges) == 0:
        raise ValidationError("cannot weigh an empty edge list")
    if np.any(w_raw <= 0):
        bad = int(np.argmin(w_raw))
        raise WeightConfigError(
            f"non-positive weight on edge {edges[bad]} (w={w_raw[bad]:.6g}); "
            "adjust c_v or s0",
            node=edges[bad][0],
        )
    echo = dict(config_echo or {})
    echo.setdefault("weight_params", {"c_t": c_t, "c_v": c_v, "s0": s0,
                                      "weight_form": cfg.weight_form})
    return TransitionGraph(
        coords=nodes.coords,
        veff=nodes.veff,
        edges=list(edges),
        weights_raw=w_raw,
        weights=w_raw / w_raw.max(),
        s=nodes.s,
        t=nodes.t,
        config_echo=echo,
    )


def dijkstra(g: TransitionGraph) -> CoarsePath:
    """Minimum-action s -> t path over renormalized weights.

    Equal-cost relaxations resolve toward the smaller predecessor id, so
    the result is deterministic on graphs with exact weight ties.
    """
    adj = g.adjacency()
    nu = g.n_nodes
    dist = np.full(nu, np.inf)
    pred = np.full(nu, -1, dtype=int)
    dist[g.s] = 0.0
    heap = [(0.0, g.s)]
    done = np.zeros(nu, dtype=bool)
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if u == g.t:
            break
        for v, e in adj[u]:
            if done[v]:
                continue
            nd = d + float(g.weights[e])
            if nd < dist[v] or (nd == dist[v] and u < pred[v]):
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
    if not np.isfinite(dist[g.t]):
        raise NoPathError(f"no path from {g.s} to {g.t}")
    nodes = [g.t]
    while nodes[-1] != g.s:
        nodes.append(int(pred[nodes[-1]]))
    nodes.reverse()
    return CoarsePath(nodes=tuple(nodes), action=float(dist[g.t]))

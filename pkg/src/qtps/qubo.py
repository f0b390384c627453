"""Binary-quadratic encoding of the path sampling problem.

One bit per node (is the node visited) and one bit per undirected edge
(is the edge traversed). The Hamiltonian is

    H = alpha * (H_s + H_t + H_r) + H_T,

where H_s = -G_s^2 + (G_s - sum_i G_si)^2 pins the source degree to one
(H_t likewise for the target), H_r = sum_{j != s,t} (2 G_j - sum_i G_ji)^2
enforces flux conservation elsewhere, and H_T = sum_e w_e G_e adds the
renormalized edge weights, i.e. the path action. On a valid source-to-
target path the constraint part evaluates to exactly -2 (H_s = H_t = -1,
H_r = 0), so H = -2 alpha + S(I).

Flux conservation alone cannot reject a valid path plus a disjoint cycle
(the cycle satisfies every degree constraint at zero cost), so validity
is always decided by `decode`, never by an energy threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import EnumerationLimitError, ValidationError
from .graph import CoarsePath, TransitionGraph

# violation rule names used by decode reports
RULE_DEGREE = "degree"
RULE_CONNECTIVITY = "connectivity"
RULE_ORPHAN = "orphan-bit"
RULE_CYCLE = "cycle"


@dataclass(frozen=True)
class BinaryAssignment:
    """One bit configuration together with its evaluated energy."""

    bits: np.ndarray
    energy: float

    def __post_init__(self):
        object.__setattr__(self, "bits", np.asarray(self.bits, dtype=np.uint8))
        if np.any(self.bits > 1):
            raise ValidationError("assignment bits must be 0/1")


@dataclass
class QuboProblem:
    """Coefficient form of H over node bits [0, nu) and edge bits [nu, nu+|E|)."""

    num_bits: int
    linear: np.ndarray                     # (num_bits,)
    quadratic: dict                        # {(i, j) i<j: coeff}
    offset: float
    alpha: float
    edges: list                            # graph edge list, (i, j) i<j
    weights: np.ndarray                    # renormalized edge weights
    s: int
    t: int
    n_nodes: int
    bit_labels: list = field(default_factory=list)

    def node_bit(self, node: int) -> int:
        return node

    def edge_bit(self, edge_idx: int) -> int:
        return self.n_nodes + edge_idx

    def evaluate(self, bits) -> float:
        """Energy from the expanded linear/quadratic coefficients."""
        x = np.asarray(bits, dtype=float)
        if x.shape != (self.num_bits,):
            raise ValidationError(f"assignment must have {self.num_bits} bits")
        e = float(self.linear @ x) + self.offset
        for (i, j), c in self.quadratic.items():
            e += c * x[i] * x[j]
        return e

    def evaluate_direct(self, bits) -> float:
        """Energy straight from the defining penalty sums (reference route)."""
        x = np.asarray(bits, dtype=int)
        gs = int(x[self.s])
        gt = int(x[self.t])
        deg = np.zeros(self.n_nodes, dtype=int)
        h_target = 0.0
        for e, (i, j) in enumerate(self.edges):
            b = int(x[self.edge_bit(e)])
            deg[i] += b
            deg[j] += b
            h_target += self.weights[e] * b
        h_s = -gs * gs + (gs - deg[self.s]) ** 2
        h_t = -gt * gt + (gt - deg[self.t]) ** 2
        h_r = 0.0
        for j in range(self.n_nodes):
            if j in (self.s, self.t):
                continue
            h_r += (2 * int(x[j]) - deg[j]) ** 2
        return self.alpha * (h_s + h_t + h_r) + h_target

    def dense_arrays(self):
        """(linear, CSR adjacency) view of the quadratic terms for kernels."""
        rows = [[] for _ in range(self.num_bits)]
        for (i, j), c in self.quadratic.items():
            rows[i].append((j, c))
            rows[j].append((i, c))
        indptr = np.zeros(self.num_bits + 1, dtype=np.int64)
        for i, r in enumerate(rows):
            indptr[i + 1] = indptr[i] + len(r)
        indices = np.empty(indptr[-1], dtype=np.int64)
        data = np.empty(indptr[-1], dtype=np.float64)
        pos = 0
        for r in rows:
            for j, c in r:
                indices[pos] = j
                data[pos] = c
                pos += 1
        return self.linear.astype(np.float64), indptr, indices, data

    def to_json(self, path=None):
        doc = {
            "num_bits": int(self.num_bits),
            "linear": {str(i): float(v) for i, v in enumerate(self.linear) if v != 0.0},
            "quadratic": {f"{i},{j}": float(c) for (i, j), c in sorted(self.quadratic.items())},
            "offset": float(self.offset),
            "bit_labels": list(self.bit_labels),
        }
        if path is None:
            return doc
        with open(path, "w") as fh:
            json.dump(doc, fh)
        return doc


def encode(g: TransitionGraph, alpha: float | None = None) -> QuboProblem:
    """Expand the constraint and target Hamiltonians into QUBO coefficients.

    alpha defaults to the sum of the renormalized edge weights. The
    expansion uses G^2 = G for binaries, so the all-zero assignment has
    energy exactly zero and there is no constant offset.
    """
    if alpha is None:
        alpha = float(g.weights.sum())
    if alpha <= 0:
        raise ValidationError("alpha must be > 0")
    nu = g.n_nodes
    n_bits = nu + g.n_edges
    linear = np.zeros(n_bits)
    quad: dict = {}

    def add_quad(i, j, c):
        key = (i, j) if i < j else (j, i)
        quad[key] = quad.get(key, 0.0) + c

    incident = [[] for _ in range(nu)]
    for e, (i, j) in enumerate(g.edges):
        incident[i].append(e)
        incident[j].append(e)

    for node in range(nu):
        ebits = [nu + e for e in incident[node]]
        if node in (g.s, g.t):
            # -G^2 + (G - sum)^2 = sum_e G_e - 2 sum_e G G_e + 2 sum_{e<e'} G_e G_e'
            for b in ebits:
                linear[b] += alpha
                add_quad(node, b, -2.0 * alpha)
        else:
            # (2G - sum)^2 = 4G + sum_e G_e - 4 sum_e G G_e + 2 sum_{e<e'} G_e G_e'
            linear[node] += 4.0 * alpha
            for b in ebits:
                linear[b] += alpha
                add_quad(node, b, -4.0 * alpha)
        for a in range(len(ebits)):
            for b in range(a + 1, len(ebits)):
                add_quad(ebits[a], ebits[b], 2.0 * alpha)

    for e in range(g.n_edges):
        linear[nu + e] += float(g.weights[e])

    labels = [f"node{u}" for u in range(nu)] + [f"edge{i}_{j}" for i, j in g.edges]
    return QuboProblem(
        num_bits=n_bits,
        linear=linear,
        quadratic=quad,
        offset=0.0,
        alpha=float(alpha),
        edges=list(g.edges),
        weights=g.weights.copy(),
        s=g.s,
        t=g.t,
        n_nodes=nu,
        bit_labels=labels,
    )


@dataclass
class DecodeReport:
    """Result of interpreting a bit assignment as a coarse path."""

    valid: bool
    path: CoarsePath | None
    violations: list          # [(rule, message)]

    def rules(self):
        return [r for r, _ in self.violations]


def path_to_assignment(q: QuboProblem, nodes) -> BinaryAssignment:
    """Bit configuration of a node sequence (inverse of decode)."""
    bits = np.zeros(q.num_bits, dtype=np.uint8)
    eidx = {edge: k for k, edge in enumerate(q.edges)}
    for n in nodes:
        bits[q.node_bit(int(n))] = 1
    for a, b in zip(nodes[:-1], nodes[1:]):
        key = (a, b) if a < b else (b, a)
        if key not in eidx:
            raise ValidationError(f"no edge between {a} and {b}")
        bits[q.edge_bit(eidx[key])] = 1
    return BinaryAssignment(bits=bits, energy=q.evaluate(bits))


def decode(q: QuboProblem, assignment) -> DecodeReport:
    """Check path topology and recover the node sequence.

    Valid iff the active bits form a single simple walk from s to t:
    endpoint degrees one, inner degrees two, every active edge endpoint
    carries an active node bit, no active bit outside the walk. Disjoint
    cycles are rejected even though they cost no constraint energy.
    """
    bits = assignment.bits if isinstance(assignment, BinaryAssignment) else np.asarray(assignment, dtype=np.uint8)
    if bits.shape != (q.num_bits,):
        raise ValidationError(f"assignment must have {q.num_bits} bits")
    violations = []
    active_nodes = {i for i in range(q.n_nodes) if bits[i]}
    active_edges = [e for e in range(len(q.edges)) if bits[q.edge_bit(e)]]

    deg = {}
    adj = {}
    for e in active_edges:
        i, j = q.edges[e]
        for u in (i, j):
            deg[u] = deg.get(u, 0) + 1
            if u not in active_nodes:
                violations.append((RULE_ORPHAN, f"active edge ({i},{j}) touches inactive node {u}"))
        adj.setdefault(i, []).append((j, e))
        adj.setdefault(j, []).append((i, e))

    for endpoint, name in ((q.s, "s"), (q.t, "t")):
        if endpoint not in active_nodes:
            violations.append((RULE_DEGREE, f"endpoint {name}={endpoint} is not visited"))
        elif deg.get(endpoint, 0) != 1:
            violations.append(
                (RULE_DEGREE, f"endpoint {name}={endpoint} has degree {deg.get(endpoint, 0)}, need 1")
            )
    for n in sorted(active_nodes):
        if n in (q.s, q.t):
            continue
        dn = deg.get(n, 0)
        if dn == 0:
            violations.append((RULE_ORPHAN, f"active node {n} has no active edge"))
        elif dn != 2:
            violations.append((RULE_DEGREE, f"inner node {n} has degree {dn}, need 2"))

    if violations:
        return DecodeReport(valid=False, path=None, violations=violations)

    # degrees are consistent: walk from s; it must terminate at t
    walk = [q.s]
    used_edges = set()
    cur, prev_edge = q.s, -1
    while True:
        nxt = [(v, e) for v, e in adj.get(cur, []) if e != prev_edge and e not in used_edges]
        if not nxt:
            break
        v, e = nxt[0]
        used_edges.add(e)
        walk.append(v)
        cur, prev_edge = v, e
        if v == q.t:
            break
    if walk[-1] != q.t:
        violations.append((RULE_CONNECTIVITY, "walk from s does not reach t"))
        return DecodeReport(valid=False, path=None, violations=violations)

    leftover_nodes = active_nodes - set(walk)
    leftover_edges = [e for e in active_edges if e not in used_edges]
    if leftover_nodes or leftover_edges:
        violations.append(
            (RULE_CYCLE,
             f"{len(leftover_nodes)} node bits / {len(leftover_edges)} edge bits "
             "lie on components disjoint from the walk")
        )
        return DecodeReport(valid=False, path=None, violations=violations)

    action = 0.0
    eidx = {edge: k for k, edge in enumerate(q.edges)}
    for a, b in zip(walk[:-1], walk[1:]):
        key = (a, b) if a < b else (b, a)
        action += float(q.weights[eidx[key]])
    return DecodeReport(valid=True, path=CoarsePath(nodes=tuple(walk), action=action), violations=[])


@njit(cache=True)
def _gray_scan(linear, indptr, indices, data, n_bits):
    """Exhaustive minimum via Gray-code single-bit updates.

    Returns (best exact energy, bits of the lexicographically smallest
    minimizer). Candidate minima are re-evaluated exactly to keep the
    incremental float drift out of tie decisions.
    """
    total = np.int64(1) << n_bits
    x = np.zeros(n_bits, dtype=np.uint8)
    f = linear.copy()                     # local fields at current x
    e_cur = 0.0
    best_bits = x.copy()
    best_e = 0.0
    tol = 1e-9
    for step in range(1, total):
        g = step ^ (step >> 1)
        gp = (step - 1) ^ ((step - 1) >> 1)
        diff = g ^ gp
        bit = 0
        while (diff >> bit) & 1 == 0:
            bit += 1
        if x[bit]:
            delta = -1.0
            x[bit] = 0
        else:
            delta = 1.0
            x[bit] = 1
        e_cur += delta * f[bit]
        for p in range(indptr[bit], indptr[bit + 1]):
            f[indices[p]] += delta * data[p]
        if e_cur < best_e + tol:
            # exact re-evaluation of the candidate
            e_exact = 0.0
            for i in range(n_bits):
                if x[i]:
                    e_exact += linear[i]
                    for p in range(indptr[i], indptr[i + 1]):
                        j = indices[p]
                        if j > i and x[j]:
                            e_exact += data[p]
            if e_exact < best_e - 1e-15:
                best_e = e_exact
                best_bits = x.copy()
            elif e_exact <= best_e + 1e-15:
                # tie: keep the lexicographically smaller bit vector
                for i in range(n_bits):
                    if x[i] != best_bits[i]:
                        if x[i] < best_bits[i]:
                            best_e = e_exact
                            best_bits = x.copy()
                        break
    return best_e, best_bits


def brute_force_ground(q: QuboProblem) -> BinaryAssignment:
    """Exact ground state by exhaustive enumeration (<= 24 bits)."""
    if q.num_bits > 24:
        raise EnumerationLimitError(
            f"{q.num_bits} bits exceed the 24-bit brute-force limit"
        )
    linear, indptr, indices, data = q.dense_arrays()
    _, bits = _gray_scan(linear, indptr, indices, data, q.num_bits)
    return BinaryAssignment(bits=bits, energy=q.evaluate(bits))


@dataclass
class PathEnsemble:
    """All simple s-t paths with Boltzmann probabilities over the action."""

    paths: list                # [CoarsePath]
    probabilities: np.ndarray

    def __len__(self):
        return len(self.paths)

    def probability_of(self, nodes) -> float:
        key = tuple(nodes)
        for p, prob in zip(self.paths, self.probabilities):
            if p.nodes == key:
                return float(prob)
        return 0.0


def enumerate_paths(g: TransitionGraph, max_len: int | None = None,
                    renormalized: bool = True, max_paths: int = 10**6) -> PathEnsemble:
    """Exhaustive simple-path enumeration between the endpoints.

    max_len bounds the node count per path (defaults to all nodes).
    Probabilities are exp(-S) normalized over the enumerated set.
    """
    if g.n_nodes > 12:
        raise EnumerationLimitError(f"{g.n_nodes} nodes exceed the 12-node enumeration limit")
    if max_len is None:
        max_len = g.n_nodes
    adj = g.adjacency()
    w = g.weights if renormalized else g.weights_raw
    paths = []

    stack = [(g.s, (g.s,), 0.0, frozenset((g.s,)))]
    while stack:
        u, trail, action, seen = stack.pop()
        if u == g.t:
            paths.append(CoarsePath(nodes=trail, action=action))
            if len(paths) > max_paths:
                raise EnumerationLimitError("path count exceeds the enumeration guard")
            continue
        if len(trail) >= max_len:
            continue
        for v, e in sorted(adj[u]):
            if v in seen:
                continue
            stack.append((v, trail + (v,), action + float(w[e]), seen | {v}))

    if not paths:
        return PathEnsemble(paths=[], probabilities=np.array([]))
    actions = np.array([p.action for p in paths])
    logw = -actions
    logw -= logw.max()
    probs = np.exp(logw)
    probs /= probs.sum()
    order = np.argsort(actions, kind="stable")
    return PathEnsemble(paths=[paths[i] for i in order], probabilities=probs[order])

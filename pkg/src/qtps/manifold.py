"""Uncharted exploration of the populated region of configuration space.

Alternates two moves, starting from one seed per metastable basin:

  1. short unbiased Langevin bursts accumulate local samples;
  2. a diffusion-map embedding of everything sampled so far identifies
     the boundary of explored territory (convex-hull vertices in the
     leading diffusion coordinates), and a local-PCA "shoot" plants new
     starting points just beyond each boundary point.

Iteration stops once the clouds grown from the two basins touch, i.e.
their minimum cross distance falls below an overlap threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.spatial
from scipy.spatial.distance import cdist

from . import dynamics
from .dynamics import Configuration, LangevinParams, rng_from_seed
from .errors import (
    BandwidthError,
    DegenerateHullError,
    DirectionUndefinedError,
    NeighborhoodError,
    ValidationError,
)
from .potentials import Potential


def euclidean_metric(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise Euclidean distances between row sets a (n,d) and b (m,d)."""
    return cdist(np.atleast_2d(a), np.atleast_2d(b))


@dataclass
class PointCloud:
    """Sampled configurations with optional per-point annotations."""

    points: np.ndarray                    # (M, d)
    energy: np.ndarray | None = None      # (M,)
    basin: np.ndarray | None = None       # (M,) int labels
    iteration: np.ndarray | None = None   # (M,) int labels

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if self.points.shape[0] < 2:
            raise ValidationError("a point cloud needs at least two points")
        if not np.all(np.isfinite(self.points)):
            raise ValidationError("point cloud contains non-finite entries")
        for name in ("energy", "basin", "iteration"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr)
                if arr.shape[0] != self.points.shape[0]:
                    raise ValidationError(f"cloud field {name} misaligned with points")
                setattr(self, name, arr)

    def __len__(self):
        return self.points.shape[0]

    def subset(self, idx) -> "PointCloud":
        idx = np.asarray(idx, dtype=int)
        pick = lambda a: None if a is None else a[idx]
        return PointCloud(self.points[idx], pick(self.energy), pick(self.basin), pick(self.iteration))

    def dedup(self) -> "PointCloud":
        """Drop exact duplicate rows, keeping first occurrences in order."""
        _, first = np.unique(self.points, axis=0, return_index=True)
        return self.subset(np.sort(first))

    def to_json(self, path=None):
        doc = {
            "points": [[float(v) for v in row] for row in self.points],
            "energy": None if self.energy is None else [float(v) for v in self.energy],
            "basin": None if self.basin is None else [int(v) for v in self.basin],
            "iteration": None if self.iteration is None else [int(v) for v in self.iteration],
        }
        if path is None:
            return doc
        with open(path, "w") as fh:
            json.dump(doc, fh)
        return doc

    @classmethod
    def from_json(cls, source) -> "PointCloud":
        if isinstance(source, (str, bytes)) or hasattr(source, "read"):
            doc = json.load(open(source)) if isinstance(source, str) else json.load(source)
        else:
            doc = source
        return cls(
            points=np.asarray(doc["points"], dtype=float),
            energy=None if doc.get("energy") is None else np.asarray(doc["energy"], dtype=float),
            basin=None if doc.get("basin") is None else np.asarray(doc["basin"], dtype=int),
            iteration=None if doc.get("iteration") is None else np.asarray(doc["iteration"], dtype=int),
        )


@dataclass
class DiffusionEmbedding:
    """Leading nontrivial eigenpairs of the row-stochastic kernel matrix.

    eigenvalues[0] is the trivial unit eigenvalue; vectors holds the
    n_keep nontrivial eigenvectors (unit 2-norm, sign fixed so the
    largest-magnitude component is positive), one per column.
    """

    eigenvalues: np.ndarray        # (n_keep + 1,), descending, [0] == 1
    vectors: np.ndarray            # (M, n_keep)
    epsilon: float
    transition_matrix: np.ndarray | None = None

    @property
    def n_points(self) -> int:
        return self.vectors.shape[0]

    def coords(self, n_dims: int = 2) -> np.ndarray:
        """First n_dims diffusion coordinates per point."""
        return self.vectors[:, :n_dims]


def kernel_bandwidth(dists: np.ndarray) -> float:
    """mean - std of the off-diagonal pairwise distances.

    Falls back to the median when mean - std is non-positive, which
    happens on heavy-tailed distance sets; raises if even the median
    vanishes (all points coincide).
    """
    iu = np.triu_indices(dists.shape[0], k=1)
    vals = dists[iu]
    mean, std = float(vals.mean()), float(vals.std())
    eps = mean - std
    if eps > 0:
        return eps
    med = float(np.median(vals))
    if med > 0:
        return med
    raise BandwidthError(
        f"degenerate cloud: pairwise distance mean {mean:.3g}, std {std:.3g}",
        mean=mean,
        std=std,
    )


def diffusion_map(
    cloud: PointCloud,
    n_keep: int,
    metric=euclidean_metric,
    epsilon: float | None = None,
    keep_transition_matrix: bool = False,
) -> DiffusionEmbedding:
    """Diffusion-map embedding of a point cloud.

    Builds the Gaussian kernel K_ij = exp(-d_ij^2 / eps^2), row-normalizes
    it into a transition matrix, and returns the top n_keep nontrivial
    eigenpairs. The eigenproblem is solved on the symmetric conjugate
    D^{-1/2} K D^{-1/2}, which shares the spectrum and guarantees real
    eigenvalues in (-1, 1].
    """
    m = len(cloud)
    if m < n_keep + 1:
        raise ValidationError(f"need at least n_keep+1={n_keep + 1} points, got {m}")
    dists = metric(cloud.points, cloud.points)
    eps = kernel_bandwidth(dists) if epsilon is None else float(epsilon)
    if eps <= 0:
        raise BandwidthError(f"kernel bandwidth must be > 0, got {eps}")
    kernel = np.exp(-((dists / eps) ** 2))
    rowsum = kernel.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(rowsum)
    sym = kernel * inv_sqrt[:, None] * inv_sqrt[None, :]
    evals, evecs = scipy.linalg.eigh(sym)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = evecs[:, order]
    # The trivial eigenvector of the symmetric conjugate is known exactly:
    # D^{1/2} 1. When the top eigenvalue is (numerically) degenerate, e.g.
    # on clouds split into far-apart blobs, eigh mixes it into the other
    # top eigenvectors; deflate it so psi_1 stays meaningful.
    phi0 = np.sqrt(rowsum)
    phi0 /= np.linalg.norm(phi0)
    cluster = np.flatnonzero(np.abs(evals - evals[0]) < 1e-9)
    if cluster.size > 1:
        block = evecs[:, cluster]
        resid = block - np.outer(phi0, phi0 @ block)
        u, sv, _ = np.linalg.svd(resid, full_matrices=False)
        rest = u[:, sv > 1e-9 * max(sv[0], 1e-300)][:, : cluster.size - 1]
        evecs[:, cluster] = np.column_stack([phi0, rest])
    else:
        evecs[:, 0] = phi0
    # back-transform symmetric eigenvectors to right eigenvectors of P
    psi = inv_sqrt[:, None] * evecs
    psi /= np.linalg.norm(psi, axis=0, keepdims=True)
    for k in range(psi.shape[1]):
        j = np.argmax(np.abs(psi[:, k]))
        if psi[j, k] < 0:
            psi[:, k] = -psi[:, k]
    embedding = DiffusionEmbedding(
        eigenvalues=evals[: n_keep + 1].copy(),
        vectors=psi[:, 1 : n_keep + 1].copy(),
        epsilon=eps,
        transition_matrix=(kernel / rowsum[:, None]) if keep_transition_matrix else None,
    )
    return embedding


def boundary(embedding: DiffusionEmbedding, n_dims: int = 2) -> np.ndarray:
    """Indices of convex-hull vertices in the first n_dims diffusion coords."""
    if n_dims not in (2, 3):
        raise ValidationError("boundary supports n_dims in {2, 3}")
    pts = embedding.coords(n_dims)
    if pts.shape[0] <= n_dims + 1:
        raise ValidationError("too few points for a convex hull")
    try:
        hull = scipy.spatial.ConvexHull(pts)
    except scipy.spatial.QhullError as err:
        raise DegenerateHullError(f"degenerate embedding: {err}") from err
    return np.sort(np.unique(hull.vertices))


def shoot(
    cloud: PointCloud,
    boundary_idx: int,
    neighbor_radius: float,
    c: float,
    metric=euclidean_metric,
) -> Configuration:
    """Plant a new configuration beyond a boundary point.

    The boundary point's neighbors (within neighbor_radius, excluding
    itself) define a local PCA frame centered on their centroid. In that
    frame the new point is the boundary point pushed a further distance c
    along the outward centroid-to-boundary direction, then mapped back to
    configuration space.
    """
    if c <= 0:
        raise ValidationError("shooting constant c must be > 0")
    q_b = cloud.points[boundary_idx]
    d = metric(q_b[None, :], cloud.points)[0]
    nbr_mask = (d <= neighbor_radius)
    nbr_mask[boundary_idx] = False
    nbrs = cloud.points[nbr_mask]
    if nbrs.shape[0] < 2:
        raise NeighborhoodError(
            f"boundary point {boundary_idx} has {nbrs.shape[0]} neighbors within "
            f"{neighbor_radius}; need >= 2"
        )
    q_c = nbrs.mean(axis=0)
    centered = nbrs - q_c
    # PCA loadings: directions with numerically nonzero variance
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    keep = svals > max(svals[0], 1e-300) * 1e-12
    loadings = vt[keep].T                     # (d, k)
    pb = (q_b - q_c) @ loadings
    norm = float(np.linalg.norm(pb))
    if norm == 0.0:
        raise DirectionUndefinedError(
            f"boundary point {boundary_idx} projects onto its neighborhood centroid"
        )
    p_new = pb + c * pb / norm
    return Configuration(p_new @ loadings.T + q_c)


@dataclass
class ExploreConfig:
    """Knobs of the explore/sample iteration loop."""

    n_burst_steps: int = 200
    burst_stride: int = 10          # keep every k-th frame of a burst
    n_keep: int = 2                 # diffusion coordinates retained
    hull_dims: int = 2
    shoot_c: float = 0.25
    overlap_threshold: float = 0.2
    max_iterations: int = 12
    neighbor_radius: float | None = None   # None: mean - std of pairwise distances
    max_boundary_shoots: int | None = None # cap shoots per iteration (None: all)
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "n_burst_steps": self.n_burst_steps,
            "burst_stride": self.burst_stride,
            "n_keep": self.n_keep,
            "hull_dims": self.hull_dims,
            "shoot_c": self.shoot_c,
            "overlap_threshold": self.overlap_threshold,
            "max_iterations": self.max_iterations,
            "neighbor_radius": self.neighbor_radius,
            "max_boundary_shoots": self.max_boundary_shoots,
            "seed": self.seed,
        }


@dataclass
class ExploreResult:
    cloud: PointCloud
    converged: bool
    iterations: int
    min_cross_distance: float


def _burst_frames(q0, n_steps, stride, potential, lp, rng):
    traj = dynamics.burst(Configuration(np.asarray(q0, dtype=float)), n_steps, potential, lp, rng)
    idx = np.arange(0, len(traj), max(1, stride))
    return traj.points[idx], traj.energies[idx]


def _min_cross_distance(points, basins, metric):
    a = points[basins == 0]
    b = points[basins == 1]
    if len(a) == 0 or len(b) == 0:
        return np.inf
    return float(metric(a, b).min())


def explore(
    potential: Potential,
    lp: LangevinParams,
    seeds,
    cfg: ExploreConfig,
    metric=euclidean_metric,
) -> ExploreResult:
    """Grow per-basin clouds until they overlap (or the iteration cap).

    seeds: two starting configurations, one per basin. Returns the merged
    cloud tagged by basin and iteration; non-convergence is flagged on
    the result, never raised.
    """
    if len(seeds) != 2:
        raise ValidationError("explore requires exactly two basin seeds")
    rngs = dynamics.spawn_rngs(cfg.seed, 2)

    points: list[np.ndarray] = []
    energies: list[float] = []
    basins: list[int] = []
    iterations: list[int] = []
    starts = [[np.asarray(s.q if isinstance(s, Configuration) else s, dtype=float)]
              for s in seeds]

    def add(frames, en, basin, it):
        for row, e in zip(frames, en):
            points.append(row)
            energies.append(float(e))
            basins.append(basin)
            iterations.append(it)

    converged = False
    min_cross = np.inf
    it = 0
    for it in range(cfg.max_iterations + 1):
        for basin in (0, 1):
            for q0 in starts[basin]:
                frames, en = _burst_frames(
                    q0, cfg.n_burst_steps, cfg.burst_stride, potential, lp, rngs[basin]
                )
                add(frames, en, basin, it)
        pts = np.asarray(points)
        bas = np.asarray(basins)
        min_cross = _min_cross_distance(pts, bas, metric)
        if min_cross < cfg.overlap_threshold:
            converged = True
            break
        if it == cfg.max_iterations:
            break
        # shoot beyond the boundary of each basin's cloud
        for basin in (0, 1):
            mask = bas == basin
            sub = PointCloud(pts[mask]).dedup()
            new_starts = []
            if len(sub) >= cfg.hull_dims + 2:
                try:
                    emb = diffusion_map(sub, n_keep=cfg.n_keep, metric=metric)
                except (BandwidthError, ValidationError):
                    emb = None
                if emb is None:
                    b_idx = np.array([], dtype=int)
                else:
                    coords = emb.coords(cfg.hull_dims)
                    extremes = np.unique(np.concatenate([
                        np.argmin(coords, axis=0), np.argmax(coords, axis=0)
                    ]))
                    try:
                        b_idx = boundary(emb, cfg.hull_dims)
                    except DegenerateHullError:
                        # quasi-collinear embedding: boundary = coordinate extremes
                        b_idx = extremes
                if cfg.max_boundary_shoots is not None and len(b_idx) > cfg.max_boundary_shoots:
                    sel = rngs[basin].choice(len(b_idx), cfg.max_boundary_shoots, replace=False)
                    # the embedding extremes are the advancing fronts; never drop them
                    b_idx = np.unique(np.concatenate([b_idx[sel], extremes]))
                radius = cfg.neighbor_radius
                if radius is None:
                    radius = kernel_bandwidth(metric(sub.points, sub.points))
                for bi in b_idx:
                    # a sparse local neighborhood gets one retry at 2x radius
                    for r in (radius, 2.0 * radius):
                        try:
                            new_starts.append(shoot(sub, int(bi), r, cfg.shoot_c, metric).q)
                            break
                        except (NeighborhoodError, DirectionUndefinedError):
                            continue
            if not new_starts:
                # fall back to re-sampling from the basin seed
                new_starts = [starts[basin][0]]
            starts[basin] = new_starts

    cloud = PointCloud(
        np.asarray(points),
        energy=np.asarray(energies),
        basin=np.asarray(basins),
        iteration=np.asarray(iterations),
    ).dedup()
    return ExploreResult(cloud=cloud, converged=converged, iterations=it, min_cross_distance=min_cross)

"""Initial cell-to-node assignment: MDS projection, CVT construction,
Kuhn-Munkres matching, constraint-driven swapping, plus the two baselines."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import ConvexPolygon, Diagram, cell_neighbors, lloyd_step, power_diagram
from .similarity import Constraint, SimilarityMatrix

STRATEGIES = ("match_swap", "random_cvt", "proj_scale")


@dataclass
class ProjectedPositions:
    node_ids: list[str]
    points: np.ndarray  # (n, 2)


@dataclass
class Assignment:
    mapping: dict[str, int]  # node id -> CVT cell index
    strategy: str


def mds_project(matrix: SimilarityMatrix) -> ProjectedPositions:
    """Classical MDS on dissimilarity 1 - s, keeping the top 2 eigenpairs."""
    n = len(matrix.node_ids)
    if n == 1:
        return ProjectedPositions(list(matrix.node_ids), np.zeros((1, 2)))
    delta = 1.0 - matrix.values
    np.fill_diagonal(delta, 0.0)
    d2 = delta ** 2
    j = np.eye(n) - np.full((n, n), 1.0 / n)
    b = -0.5 * j @ d2 @ j
    b = 0.5 * (b + b.T)
    evals, evecs = np.linalg.eigh(b)
    order = np.argsort(evals)[::-1][:2]
    pts = np.zeros((n, 2))
    for col, idx in enumerate(order):
        lam = evals[idx]
        if lam <= 0.0:
            continue
        vec = evecs[:, idx]
        # deterministic sign: largest-magnitude entry positive
        k = int(np.argmax(np.abs(vec)))
        if vec[k] < 0.0:
            vec = -vec
        pts[:, col] = vec * np.sqrt(lam)
    return ProjectedPositions(list(matrix.node_ids), pts)


def build_cvt(boundary: ConvexPolygon, n: int, seed: int = 0, max_iter: int = 500) -> Diagram:
    """Random equal-weight sites relaxed with Lloyd until convergence."""
    rng = np.random.default_rng(seed)
    sites = []
    while len(sites) < n:
        p = boundary.sample_point(rng)
        if all(np.hypot(*(p - q)) > 1e-9 * boundary.diagonal for q in sites):
            sites.append(p)
    diagram = power_diagram(sites, boundary, node_ids=[f"cvt{i}" for i in range(n)])
    tol = 1e-4 * diagram.scale
    for _ in range(max_iter):
        before = diagram.sites.copy()
        lloyd_step(diagram, rng)
        disp = np.hypot(*(diagram.sites - before).T).max()
        if disp < tol:
            break
    return diagram


def fit_points_in_polygon(points: np.ndarray, boundary: ConvexPolygon, margin: float = 0.9) -> np.ndarray:
    """Uniformly scale + translate points so they fit inside the boundary.

    The point cloud is centered on the boundary centroid and scaled to the
    largest factor whose bounding box stays inside, times `margin`. Any point
    still outside (numerically) is pulled inward along the ray to the centroid.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    center = boundary.centroid
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    mid = 0.5 * (lo + hi)
    spread = pts - mid
    max_ext = np.abs(spread).max()
    if max_ext == 0.0:
        return np.tile(center, (len(pts), 1))
    # largest scale whose scaled bbox corners stay inside the convex boundary
    half = 0.5 * (hi - lo)
    corners = np.array([[sx, sy] for sx in (-1, 1) for sy in (-1, 1)]) * half
    s_lo, s_hi = 0.0, boundary.diagonal / max_ext
    for _ in range(60):
        s = 0.5 * (s_lo + s_hi)
        if all(boundary.contains(center + s * c, tol=-1e-9 * boundary.diagonal) for c in corners):
            s_lo = s
        else:
            s_hi = s
    scale = margin * s_lo
    out = center + scale * spread
    tol = -1e-9 * boundary.diagonal
    for i, p in enumerate(out):
        if not boundary.contains(p, tol=tol):
            d = p - center
            t_lo, t_hi = 0.0, 1.0
            for _ in range(60):
                t = 0.5 * (t_lo + t_hi)
                if boundary.contains(center + t * d, tol=tol):
                    t_lo = t
                else:
                    t_hi = t
            out[i] = center + 0.95 * t_lo * d
    return out


def match_assignment(positions: ProjectedPositions, cvt: Diagram) -> Assignment:
    """Exact minimum-cost bijection of nodes to CVT cells (squared distances)."""
    n = len(positions.node_ids)
    if n != len(cvt.cells):
        raise ValueError(f"position/cell count mismatch: {n} vs {len(cvt.cells)}")
    pts = fit_points_in_polygon(positions.points, cvt.boundary)
    centroids = np.array([
        c.polygon.centroid if c.polygon is not None else c.site for c in cvt.cells
    ])
    diff = pts[:, None, :] - centroids[None, :, :]
    cost = diff[:, :, 0] ** 2 + diff[:, :, 1] ** 2
    rows, cols = linear_sum_assignment(cost)
    mapping = {positions.node_ids[r]: int(c) for r, c in zip(rows, cols)}
    return Assignment(mapping=mapping, strategy="match_swap")


def cvt_adjacency(cvt: Diagram) -> set[tuple[int, int]]:
    index = {c.node_id: i for i, c in enumerate(cvt.cells)}
    adj = set()
    for a, b in cell_neighbors([cvt]):
        i, j = index[a], index[b]
        adj.add((min(i, j), max(i, j)))
    return adj


def realized_count(assignment: Assignment, constraints: list[Constraint], adjacency: set[tuple[int, int]]) -> int:
    count = 0
    for c in constraints:
        if c.a in assignment.mapping and c.b in assignment.mapping:
            i, j = assignment.mapping[c.a], assignment.mapping[c.b]
            if (min(i, j), max(i, j)) in adjacency:
                count += 1
    return count


def swap_improve(
    assignment: Assignment,
    constraints: list[Constraint],
    cvt: Diagram,
    max_passes: int = 20,
    trace: list | None = None,
) -> Assignment:
    """Greedy pairwise swaps that strictly increase realized constraints.

    Passes repeat until a full pass makes no swap or `max_passes` elapse; the
    realized count never decreases.
    """
    adjacency = cvt_adjacency(cvt)
    mapping = dict(assignment.mapping)
    node_ids = sorted(mapping)
    current = realized_count(Assignment(mapping, "match_swap"), constraints, adjacency)
    if trace is not None:
        trace.append(current)
    for _ in range(max_passes):
        swapped = False
        for i in range(len(node_ids)):
            for j in range(i + 1, len(node_ids)):
                u, v = node_ids[i], node_ids[j]
                mapping[u], mapping[v] = mapping[v], mapping[u]
                candidate = realized_count(Assignment(mapping, "match_swap"), constraints, adjacency)
                if candidate > current:
                    current = candidate
                    swapped = True
                    if trace is not None:
                        trace.append(current)
                else:
                    mapping[u], mapping[v] = mapping[v], mapping[u]
        if not swapped:
            break
    return Assignment(mapping=mapping, strategy="match_swap")


def proj_scale_init(positions: ProjectedPositions, boundary: ConvexPolygon) -> np.ndarray:
    """Baseline: MDS positions scaled into the parent at 90% margin, no matching."""
    return fit_points_in_polygon(positions.points, boundary, margin=0.9)


def random_assignment(node_ids: list[str], cvt: Diagram, seed: int = 0) -> Assignment:
    if len(node_ids) != len(cvt.cells):
        raise ValueError(f"node/cell count mismatch: {len(node_ids)} vs {len(cvt.cells)}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(node_ids))
    return Assignment(
        mapping={nid: int(perm[i]) for i, nid in enumerate(node_ids)},
        strategy="random_cvt",
    )

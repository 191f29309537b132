"""Pairwise node similarities, binning, and constraint extraction."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tree_model import Tree, TreeNode

N_BINS = 5

SIMILARITY_KINDS = ("cosine", "jaccard", "binary-equality")


class SimilarityError(ValueError):
    """Invalid similarity inputs."""


@dataclass
class SimilarityMatrix:
    level: int
    node_ids: list[str]
    values: np.ndarray  # symmetric, zero diagonal, entries in [0,1]


@dataclass(frozen=True)
class Constraint:
    a: str
    b: str
    similarity: float
    bin: int
    level: int

    def pair(self) -> tuple[str, str]:
        return (self.a, self.b)


def compute_similarity(u, v, kind: str = "cosine") -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.ndim != 1 or u.size < 1:
        raise SimilarityError("vectors must share a dimension d >= 1")
    if kind == "cosine":
        nu = np.linalg.norm(u)
        nv = np.linalg.norm(v)
        if nu == 0.0 or nv == 0.0:
            return 0.0
        return max(0.0, float(u @ v) / (nu * nv))
    if kind in ("jaccard", "binary-equality"):
        if not (np.isin(u, (0.0, 1.0)).all() and np.isin(v, (0.0, 1.0)).all()):
            raise SimilarityError(f"{kind} requires binary vectors")
        if kind == "jaccard":
            union = np.logical_or(u, v).sum()
            if union == 0:
                return 0.0
            return float(np.logical_and(u, v).sum() / union)
        return 1.0 if np.array_equal(u, v) else 0.0
    raise SimilarityError(f"unknown similarity kind: {kind!r}")


def pairwise_matrix(nodes: list[TreeNode], kind: str = "cosine") -> SimilarityMatrix:
    """Symmetric similarity matrix over same-depth nodes in the given order."""
    if not nodes:
        raise SimilarityError("need at least one node")
    depths = {n.depth for n in nodes}
    if len(depths) != 1:
        raise SimilarityError("nodes must share a depth")
    n = len(nodes)
    values = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            s = compute_similarity(nodes[i].sim_vector, nodes[j].sim_vector, kind)
            values[i, j] = values[j, i] = s
    return SimilarityMatrix(level=depths.pop(), node_ids=[n_.id for n_ in nodes], values=values)


def pair_matrix_from_lifted(node_ids: list[str], level: int, lifted: dict[tuple[str, str], float]) -> SimilarityMatrix:
    """Matrix for explicit-pair mode, from level-lifted pair similarities."""
    n = len(node_ids)
    index = {nid: i for i, nid in enumerate(node_ids)}
    values = np.zeros((n, n))
    for (a, b), s in lifted.items():
        if a in index and b in index:
            values[index[a], index[b]] = values[index[b], index[a]] = s
    return SimilarityMatrix(level=level, node_ids=list(node_ids), values=values)


def bin_index(similarity: float) -> int:
    """Equal-width bins over (0,1]: 0=[0.8,1.0], 1=[0.6,0.8), ... 4=(0,0.2)."""
    if similarity >= 0.8:
        return 0
    if similarity >= 0.6:
        return 1
    if similarity >= 0.4:
        return 2
    if similarity >= 0.2:
        return 3
    return 4


def bin_and_filter(matrix: SimilarityMatrix) -> list[Constraint]:
    """Per node, keep partners from the strongest bins up to the first empty one.

    The union over nodes is deduplicated into undirected constraints: a pair
    survives if either endpoint selected it. Zero similarity is never binned.
    """
    ids = matrix.node_ids
    n = len(ids)
    selected: dict[tuple[str, str], float] = {}
    for i in range(n):
        bins: list[list[int]] = [[] for _ in range(N_BINS)]
        for j in range(n):
            if j == i:
                continue
            s = matrix.values[i, j]
            if s > 0.0:
                bins[bin_index(s)].append(j)
        for b in bins:
            if not b:
                break
            for j in b:
                key = tuple(sorted((ids[i], ids[j])))
                selected[key] = matrix.values[i, j]
    out = [
        Constraint(a=a, b=b, similarity=float(s), bin=bin_index(float(s)), level=matrix.level)
        for (a, b), s in selected.items()
    ]
    out.sort(key=lambda c: (c.level, c.a, c.b))
    return out


def extract_level_constraints(tree: Tree, kind: str = "cosine") -> dict[int, list[Constraint]]:
    """Constraints per depth 1..D; sibling-ness is ignored, so pairs may cross parents."""
    result: dict[int, list[Constraint]] = {}
    for depth in range(1, tree.uniform_depth + 1):
        nodes = tree.nodes_at_depth(depth)
        ids = [n.id for n in nodes]
        if tree.pair_mode:
            matrix = pair_matrix_from_lifted(ids, depth, tree.level_pairs.get(depth, {}))
        elif all(n.sim_vector is not None for n in nodes):
            matrix = pairwise_matrix(nodes, kind)
        else:
            result[depth] = []
            continue
        result[depth] = bin_and_filter(matrix)
    return result


def level_matrix(tree: Tree, depth: int, kind: str = "cosine") -> SimilarityMatrix:
    """Similarity matrix over all nodes of one depth, in BFS document order."""
    nodes = tree.nodes_at_depth(depth)
    ids = [n.id for n in nodes]
    if tree.pair_mode:
        return pair_matrix_from_lifted(ids, depth, tree.level_pairs.get(depth, {}))
    if all(n.sim_vector is not None for n in nodes):
        return pairwise_matrix(nodes, kind)
    return SimilarityMatrix(level=depth, node_ids=ids, values=np.zeros((len(ids), len(ids))))

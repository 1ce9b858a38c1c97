"""Reproducible input generators for tests and scaling experiments.

Every generator is a pure function of (shape parameters, rng), so an
experiment is reproducible from (structure, n, seed).
"""

from __future__ import annotations

import random
from typing import Optional

from .treecontract import ForestInput


def path_edges(n: int) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(n - 1)]


def star_edges(n: int) -> list[tuple[int, int]]:
    return [(0, i) for i in range(1, n)]


def binary_tree_edges(n: int) -> list[tuple[int, int]]:
    return [((i - 1) // 2, i) for i in range(1, n)]


def random_tree_edges(n: int, rng: random.Random, max_degree: Optional[int] = None) -> list[tuple[int, int]]:
    """Uniform attachment: vertex i picks a uniformly random earlier parent,
    resampling (bounded) when a degree cap is requested."""
    edges = []
    degree = [0] * n
    for i in range(1, n):
        parent = rng.randrange(i)
        if max_degree is not None and degree[parent] >= max_degree:
            for _ in range(64):
                parent = rng.randrange(i)
                if degree[parent] < max_degree:
                    break
            else:
                parent = min(range(i), key=lambda x: degree[x])
        edges.append((parent, i))
        degree[parent] += 1
        degree[i] += 1
    return edges


STRUCTURES = {
    "path": lambda n, rng: path_edges(n),
    "star": lambda n, rng: star_edges(n),
    "binary-tree": lambda n, rng: binary_tree_edges(n),
    "random-tree": random_tree_edges,
}


def structure_edges(structure: str, n: int, rng: random.Random) -> list[tuple[int, int]]:
    try:
        make = STRUCTURES[structure]
    except KeyError:
        raise ValueError(f"unknown structure {structure!r}; choose from {sorted(STRUCTURES)}")
    return make(n, rng)


def random_forest(
    n: int,
    rng: random.Random,
    keep_prob: float = 0.8,
    weighted: bool = False,
    weight_range: tuple[int, int] = (-100, 100),
) -> ForestInput:
    """A random tree with edges independently dropped, optionally weighted."""
    edges = [e for e in random_tree_edges(n, rng) if rng.random() < keep_prob]
    if weighted:
        edges = [(u, v, rng.randint(*weight_range)) for u, v in edges]
        weights = {v: rng.randint(*weight_range) for v in range(n)}
        return ForestInput(n, edges, weights)
    return ForestInput(n, edges)

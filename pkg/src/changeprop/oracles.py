"""Brute-force reference implementations used to validate every query path.

These deliberately share no code with the engine-backed structures: plain
breadth-first search, rooted DFS, and linear scans over explicit adjacency.
"""

from __future__ import annotations

from collections import deque
from functools import reduce
from typing import Any, Iterable, Optional


def adjacency(n: int, edges: Iterable) -> list[list[int]]:
    adj: list[list[int]] = [[] for _ in range(n)]
    for e in edges:
        u, v = e[0], e[1]
        adj[u].append(v)
        adj[v].append(u)
    return adj


def bfs_connected(n: int, edges: Iterable, u: int, v: int) -> bool:
    if u == v:
        return True
    adj = adjacency(n, edges)
    seen = {u}
    queue = deque([u])
    while queue:
        x = queue.popleft()
        for y in adj[x]:
            if y == v:
                return True
            if y not in seen:
                seen.add(y)
                queue.append(y)
    return False


def components(n: int, edges: Iterable) -> list[int]:
    """Component label per vertex (the minimum vertex id in the component)."""
    adj = adjacency(n, edges)
    label = [-1] * n
    for s in range(n):
        if label[s] != -1:
            continue
        label[s] = s
        queue = deque([s])
        while queue:
            x = queue.popleft()
            for y in adj[x]:
                if label[y] == -1:
                    label[y] = s
                    queue.append(y)
    return label


def subtree_sum_dfs(n: int, edges: Iterable, weights: dict, root: int, sub: int) -> Any:
    """Sum of vertex weights in the subtree of ``sub`` when rooted at ``root``."""
    adj = adjacency(n, edges)
    parent = {root: None}
    order = [root]
    queue = deque([root])
    while queue:
        x = queue.popleft()
        for y in adj[x]:
            if y not in parent:
                parent[y] = x
                order.append(y)
                queue.append(y)
    if sub not in parent:
        raise ValueError(f"{sub} not connected to {root}")
    total = {x: weights.get(x, 0) for x in order}
    for x in reversed(order):
        if parent[x] is not None:
            total[parent[x]] += total[x]
    return total[sub]


def tree_path(n: int, edges: Iterable, u: int, v: int) -> Optional[list[tuple[int, int]]]:
    """The unique u..v path as a list of edges, or None when disconnected."""
    if u == v:
        return []
    adj = adjacency(n, edges)
    parent: dict[int, Optional[int]] = {u: None}
    queue = deque([u])
    while queue:
        x = queue.popleft()
        for y in adj[x]:
            if y not in parent:
                parent[y] = x
                if y == v:
                    queue.clear()
                    break
                queue.append(y)
    if v not in parent:
        return None
    path = []
    x = v
    while parent[x] is not None:
        path.append((parent[x], x) if parent[x] < x else (x, parent[x]))
        x = parent[x]
    return list(reversed(path))


def path_max_scan(n: int, edges: Iterable, edge_weight: dict, u: int, v: int):
    """Heaviest edge on the unique u..v path: (weight, edge) or None for an
    empty path.  Unweighted edges (weight None) never win."""
    path = tree_path(n, edges, u, v)
    if path is None:
        raise ValueError(f"{u} and {v} are disconnected")
    best = None
    for e in path:
        w = edge_weight.get(e)
        if w is not None and (best is None or w > best[0]):
            best = (w, e)
    return best


def fold_range(values, op, i: int, j: int):
    return reduce(op, values[i : j + 1])

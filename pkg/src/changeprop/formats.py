"""Text file formats for the CLI.

Forest file: header ``n m``, then m lines ``u v [weight]``.
Vertex-weight file: lines ``v w``.
Batch file: lines ``+ u v [w]`` (link) and ``- u v`` (cut); consecutive lines
with the same sign form one batch.
Chains file: one chain per line, nodes as space-separated ``id:value``; the
ids across all chains must cover 0..n-1 exactly.
Values file (map-reduce): whitespace-separated numbers.
"""

from __future__ import annotations

from typing import Iterable

from .treecontract import ForestInput


class FormatError(ValueError):
    pass


def _num(tok: str):
    try:
        return int(tok)
    except ValueError:
        try:
            return float(tok)
        except ValueError:
            raise FormatError(f"not a number: {tok!r}")


def parse_forest(text: str) -> ForestInput:
    lines = [ln.split("#")[0].split() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise FormatError("empty forest file")
    if len(lines[0]) != 2:
        raise FormatError(f"forest header must be 'n m', got {' '.join(lines[0])!r}")
    n, m = int(lines[0][0]), int(lines[0][1])
    if len(lines) - 1 != m:
        raise FormatError(f"header says {m} edges, file has {len(lines) - 1}")
    edges = []
    for ln in lines[1:]:
        if len(ln) == 2:
            edges.append((int(ln[0]), int(ln[1])))
        elif len(ln) == 3:
            edges.append((int(ln[0]), int(ln[1]), _num(ln[2])))
        else:
            raise FormatError(f"bad edge line: {' '.join(ln)!r}")
    return ForestInput(n, edges)


def parse_vertex_weights(text: str) -> dict[int, float]:
    weights = {}
    for ln in text.splitlines():
        parts = ln.split("#")[0].split()
        if not parts:
            continue
        if len(parts) != 2:
            raise FormatError(f"bad vertex-weight line: {ln!r}")
        weights[int(parts[0])] = _num(parts[1])
    return weights


def parse_batches(text: str) -> list[tuple[str, list[tuple]]]:
    """Group consecutive same-sign lines into ('link'|'cut', edges) batches."""
    batches: list[tuple[str, list[tuple]]] = []
    for ln in text.splitlines():
        parts = ln.split("#")[0].split()
        if not parts:
            continue
        sign, rest = parts[0], parts[1:]
        if sign == "+" and len(rest) in (2, 3):
            op = "link"
            edge = (int(rest[0]), int(rest[1])) if len(rest) == 2 else (
                int(rest[0]),
                int(rest[1]),
                _num(rest[2]),
            )
        elif sign == "-" and len(rest) == 2:
            op = "cut"
            edge = (int(rest[0]), int(rest[1]))
        else:
            raise FormatError(f"bad batch line: {ln!r}")
        if batches and batches[-1][0] == op:
            batches[-1][1].append(edge)
        else:
            batches.append((op, [edge]))
    return batches


def parse_chains(text: str) -> list[list[tuple[int, float]]]:
    chains = []
    seen = set()
    for ln in text.splitlines():
        parts = ln.split("#")[0].split()
        if not parts:
            continue
        chain = []
        for tok in parts:
            if ":" not in tok:
                raise FormatError(f"chain nodes are id:value, got {tok!r}")
            ident, value = tok.split(":", 1)
            ident = int(ident)
            if ident in seen:
                raise FormatError(f"node id {ident} appears twice")
            seen.add(ident)
            chain.append((ident, _num(value)))
        chains.append(chain)
    if seen and seen != set(range(len(seen))):
        raise FormatError(f"node ids must cover 0..{len(seen) - 1} exactly")
    return chains


def chains_to_nodes(chains: list[list[tuple[int, float]]]) -> list[tuple]:
    """(prev, next, value) triples indexed by node id, from parsed chains."""
    n = sum(len(c) for c in chains)
    nodes: list = [None] * n
    for chain in chains:
        for k, (ident, value) in enumerate(chain):
            prev = chain[k - 1][0] if k > 0 else None
            nxt = chain[k + 1][0] if k + 1 < len(chain) else None
            nodes[ident] = (prev, nxt, value)
    return nodes


def parse_values(text: str) -> list:
    return [_num(tok) for tok in text.split()]


def parse_queries(text: str) -> list[tuple]:
    """One query per line: 'connected u v' | 'repr u' | 'subtree r u' |
    'pathmax u v'."""
    queries = []
    arity = {"connected": 2, "repr": 1, "subtree": 2, "pathmax": 2}
    for ln in text.splitlines():
        parts = ln.split("#")[0].split()
        if not parts:
            continue
        kind = parts[0]
        if kind not in arity or len(parts) - 1 != arity[kind]:
            raise FormatError(f"bad query line: {ln!r}")
        queries.append((kind, *[int(x) for x in parts[1:]]))
    return queries

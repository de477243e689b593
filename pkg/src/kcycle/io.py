"""Plain-text edge lists, forbidden-pair lists, partitions and parameter files.

Edge list: one edge per line, ``u<TAB>v<TAB>w`` with 0-based node ids. Lines
starting with ``#`` are comments, except a ``#n <count>`` header which fixes
the node count (otherwise ``n = 1 + max index``). Forbidden-pair files use the
same layout without the weight column; partition files hold ``u<TAB>label``.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .graph import WeightedDigraph, as_partition


class EdgeListError(ValueError):
    def __init__(self, path, lineno: int, msg: str):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.path = path
        self.lineno = lineno


def _records(path, ncols: int):
    """Yield (lineno, fields) for data lines, plus the ``#n`` header if any."""
    header_n = None
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "n":
                    try:
                        header_n = int(parts[1])
                    except ValueError:
                        raise EdgeListError(path, lineno, f"bad node-count header {line!r}")
                continue
            fields = line.split("\t") if "\t" in line else line.split()
            if len(fields) != ncols:
                raise EdgeListError(path, lineno, f"expected {ncols} columns, got {len(fields)}")
            out.append((lineno, fields))
    return header_n, out


def _node(path, lineno, text):
    try:
        u = int(text)
    except ValueError:
        raise EdgeListError(path, lineno, f"bad node id {text!r}")
    if u < 0:
        raise EdgeListError(path, lineno, f"negative node id {u}")
    return u


def load_edge_list(path, n: int | None = None, forbidden=None) -> WeightedDigraph:
    """Read a weighted edge list.

    ``forbidden`` defaults to the self-loop diagonal. Raises
    :class:`EdgeListError` (carrying the line number) for malformed lines,
    non-positive weights, out-of-range node ids, duplicate edges and edges
    in the forbidden set.
    """
    header_n, rows = _records(path, 3)
    parsed = []
    for lineno, (a, b, c) in rows:
        u, v = _node(path, lineno, a), _node(path, lineno, b)
        try:
            w = float(c)
        except ValueError:
            raise EdgeListError(path, lineno, f"bad weight {c!r}")
        if not np.isfinite(w) or w <= 0:
            raise EdgeListError(path, lineno, f"weight must be positive and finite, got {c}")
        parsed.append((lineno, u, v, w))
    if n is None:
        n = header_n
    if n is None:
        n = 1 + max((max(u, v) for _, u, v, _ in parsed), default=-1)
    G = WeightedDigraph(n, forbidden=forbidden)
    for lineno, u, v, w in parsed:
        if u >= n or v >= n:
            raise EdgeListError(path, lineno, f"node index out of range for n={n}")
        if (u, v) in G.forbidden:
            raise EdgeListError(path, lineno, f"edge ({u}, {v}) is forbidden")
        if G.has_edge(u, v):
            raise EdgeListError(path, lineno, f"duplicate edge ({u}, {v})")
        G.set_weight(u, v, w)
    return G


def format_edge_list(G: WeightedDigraph) -> str:
    lines = [f"#n {G.n}"]
    # repr is the shortest string that round-trips the double exactly
    lines.extend(f"{u}\t{v}\t{w!r}" for u, v, w in G.edges())
    return "\n".join(lines) + "\n"


def save_edge_list(G: WeightedDigraph, path) -> None:
    Path(path).write_text(format_edge_list(G), encoding="utf-8")


def load_forbidden(path, n: int | None = None) -> frozenset:
    _, rows = _records(path, 2)
    pairs = set()
    for lineno, (a, b) in rows:
        u, v = _node(path, lineno, a), _node(path, lineno, b)
        if n is not None and (u >= n or v >= n):
            raise EdgeListError(path, lineno, f"node index out of range for n={n}")
        pairs.add((u, v))
    return frozenset(pairs)


def save_forbidden(pairs, path) -> None:
    text = "".join(f"{u}\t{v}\n" for u, v in sorted(pairs))
    Path(path).write_text(text, encoding="utf-8")


def load_partition(path, n: int | None = None) -> np.ndarray:
    _, rows = _records(path, 2)
    labels = {}
    for lineno, (a, b) in rows:
        u = _node(path, lineno, a)
        if u in labels:
            raise EdgeListError(path, lineno, f"node {u} labelled twice")
        labels[u] = b
    size = n if n is not None else 1 + max(labels, default=-1)
    missing = [u for u in range(size) if u not in labels]
    if missing or any(u >= size for u in labels):
        raise ValueError(f"{path}: partition must label every node 0..{size - 1} exactly once")
    return as_partition([labels[u] for u in range(size)])


def save_partition(c, path) -> None:
    text = "".join(f"{u}\t{int(lab)}\n" for u, lab in enumerate(c))
    Path(path).write_text(text, encoding="utf-8")


def load_params(path):
    from .decm import DecmParams

    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return DecmParams(*(np.asarray(doc[k], dtype=float) for k in ("alpha", "beta", "phi", "psi")))


def save_params(p, path) -> None:
    doc = {k: getattr(p, k).tolist() for k in ("alpha", "beta", "phi", "psi")}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")

"""Graph file encodings: JSON and Pajek.

Both encodings carry the same information: the vertex list in ID order and
the undirected weighted edge list.  Directed activity counters are not part
of graph files; they can only be rebuilt from transaction chunk files.
Exports are byte-deterministic so identical graphs always produce identical
files.
"""

from __future__ import annotations

import json
import re

from .errors import ExportError, ParseError, UsageError
from .graph import Chain, InteractionGraph

FORMAT_JSON = "json"
FORMAT_PAJEK = "pajek"

_PAJEK_VERTEX = re.compile(r'^(\d+) "(.*)"$')
_PAJEK_EDGE = re.compile(r"^(\d+) (\d+) (\d+)$")


def normalize_format(fmt: str) -> str:
    name = str(fmt).strip().lower()
    if name not in (FORMAT_JSON, FORMAT_PAJEK):
        raise UsageError(f"unknown graph format: {fmt!r} (expected json or pajek)")
    return name


def infer_format(path) -> str:
    """Guess the encoding from a file name suffix."""
    text = str(path).lower()
    if text.endswith(".json"):
        return FORMAT_JSON
    if text.endswith(".pajek") or text.endswith(".net"):
        return FORMAT_PAJEK
    raise UsageError(f"cannot infer graph format from {path!r}; "
                     "expected a .json, .pajek, or .net suffix")


def export_json(graph: InteractionGraph, path) -> None:
    """Write the graph as one compact JSON object.

    Key order is chain, vertices, edges; the chain key is present only when
    the graph knows its chain.
    """
    doc: dict = {}
    if graph.chain is not None:
        doc["chain"] = graph.chain.value
    doc["vertices"] = graph.node_keys()
    doc["edges"] = [[graph.keys[a], graph.keys[b], amount]
                    for a, b, amount in graph.edge_triples()]
    payload = json.dumps(doc, separators=(",", ":"), ensure_ascii=False)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(payload)
            fh.write("\n")
    except OSError as exc:
        raise ExportError(f"cannot write {path}: {exc}") from exc


def export_pajek(graph: InteractionGraph, path) -> None:
    """Write the graph in Pajek form: a vertex section, then an edge list."""
    lines = [f"*Vertices {graph.node_count}"]
    for node in graph.node_ids():
        lines.append(f'{node} "{graph.keys[node]}"')
    lines.append("*Edges")
    for a, b, amount in graph.edge_triples():
        lines.append(f"{a} {b} {amount}")
    text = "\n".join(lines) + "\n"
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    except (OSError, UnicodeEncodeError) as exc:
        raise ExportError(f"cannot write {path}: {exc}") from exc


def export_graph(graph: InteractionGraph, path, fmt: str) -> None:
    if normalize_format(fmt) == FORMAT_JSON:
        export_json(graph, path)
    else:
        export_pajek(graph, path)


def import_graph(path, fmt: str | None = None) -> InteractionGraph:
    """Read a graph file written by the matching export.

    When ``fmt`` is omitted it is inferred from the file suffix.

    Validation is strict: referential integrity between edges and vertices,
    no duplicate vertices, no self-loops, no repeated pairs.  Counter fields
    (in_tx/out_tx, per-edge tx_count) are not stored in graph files and come
    back zeroed.
    """
    fmt = infer_format(path) if fmt is None else normalize_format(fmt)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read graph file: {exc}", path=path) from exc
    if fmt == FORMAT_JSON:
        return _parse_json(text, path)
    return _parse_pajek(text, path)


def _require(condition: bool, message: str, path, line=None, offset=None) -> None:
    if not condition:
        raise ParseError(message, path=path, line=line, offset=offset)


def _parse_json(text: str, path) -> InteractionGraph:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=path, line=exc.lineno, offset=exc.colno) from exc
    _require(isinstance(doc, dict), "top-level value is not an object", path)
    unknown = set(doc) - {"chain", "vertices", "edges"}
    _require(not unknown, f"unknown keys: {sorted(unknown)}", path)
    chain = doc.get("chain")
    if chain is not None:
        try:
            chain = Chain(chain)
        except ValueError:
            raise ParseError(f"unknown chain: {chain!r}", path=path) from None
    vertices = doc.get("vertices")
    edges = doc.get("edges")
    _require(isinstance(vertices, list), '"vertices" missing or not a list', path)
    _require(isinstance(edges, list), '"edges" missing or not a list', path)
    graph = InteractionGraph(chain)
    for key in vertices:
        _require(isinstance(key, str) and bool(key), f"bad vertex key: {key!r}", path)
        _require(key not in graph, f"duplicate vertex: {key!r}", path)
        graph.intern_node(key)
    for entry in edges:
        _require(isinstance(entry, list) and len(entry) == 3,
                 f"edge is not a [key, key, amount] triple: {entry!r}", path)
        key_a, key_b, amount = entry
        for key in (key_a, key_b):
            _require(isinstance(key, str), f"bad edge endpoint: {key!r}", path)
            _require(key in graph, f"edge names unlisted vertex: {key!r}", path)
        _require(type(amount) is int and amount >= 0,
                 f"bad edge amount: {amount!r}", path)
        a = graph.node_id(key_a)
        b = graph.node_id(key_b)
        _require(a != b, f"self-loop on vertex {key_a!r}", path)
        _require(not graph.has_edge(a, b),
                 f"duplicate edge {key_a!r} - {key_b!r}", path)
        graph.record_edge(a, b, amount)
    return graph


def _parse_pajek(text: str, path) -> InteractionGraph:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    _require(bool(lines), "empty file", path, line=1, offset=1)
    header = lines[0]
    _require(header.startswith("*Vertices ") and header[10:].isdigit(),
             f"expected '*Vertices <n>', got {header!r}", path, line=1, offset=1)
    count = int(header[10:])
    _require(len(lines) >= count + 2,
             f"file ends inside the {count}-vertex section", path,
             line=len(lines), offset=1)
    graph = InteractionGraph()
    for idx in range(1, count + 1):
        match = _PAJEK_VERTEX.match(lines[idx])
        _require(match is not None, f"bad vertex line: {lines[idx]!r}",
                 path, line=idx + 1, offset=1)
        _require(int(match.group(1)) == idx,
                 f"vertex IDs must run 1..{count}; got {match.group(1)}",
                 path, line=idx + 1, offset=1)
        key = match.group(2)
        _require(bool(key) and key not in graph,
                 f"empty or duplicate vertex key: {key!r}", path,
                 line=idx + 1, offset=len(match.group(1)) + 2)
        graph.intern_node(key)
    _require(lines[count + 1] == "*Edges",
             f"expected '*Edges', got {lines[count + 1]!r}", path,
             line=count + 2, offset=1)
    for idx in range(count + 2, len(lines)):
        match = _PAJEK_EDGE.match(lines[idx])
        _require(match is not None, f"bad edge line: {lines[idx]!r}",
                 path, line=idx + 1, offset=1)
        a, b, amount = (int(g) for g in match.groups())
        for node in (a, b):
            _require(1 <= node <= count, f"edge names unknown vertex {node}",
                     path, line=idx + 1, offset=1)
        _require(a != b, f"self-loop on vertex {a}", path, line=idx + 1, offset=1)
        _require(not graph.has_edge(a, b), f"duplicate edge {a} - {b}",
                 path, line=idx + 1, offset=1)
        graph.record_edge(a, b, amount)
    return graph

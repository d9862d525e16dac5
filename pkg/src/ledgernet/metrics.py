"""Network diagnostics: degrees, components, clustering, shortest paths.

All metrics live on the undirected simple graph; in/out activity histograms
come from the per-node transaction counters.  Shortest paths use BFS because
the graph is unweighted for metric purposes (transfer amounts are not
distances).

Parallel runs partition nodes into fixed-size chunks and reduce per-chunk
results in node order, so every report field is bit-identical for any worker
count.
"""

from __future__ import annotations

import math
import random
import time
from collections import Counter, deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

from .errors import UndefinedMetricError
from .graph import InteractionGraph

_NODE_CHUNK = 256


@dataclass
class DegreeReport:
    """Histograms over all nodes: degree value -> node count."""

    in_histogram: dict[int, int] = field(default_factory=dict)
    out_histogram: dict[int, int] = field(default_factory=dict)
    total_histogram: dict[int, int] = field(default_factory=dict)
    zero_in_fraction: float = 0.0
    zero_out_fraction: float = 0.0
    max_degree: int = 0
    max_degree_fraction_of_nodes: float = 0.0


@dataclass
class ComponentCensus:
    count: int = 0
    sizes: list[int] = field(default_factory=list)
    main_component_size: int = 0
    main_component_fraction: float = 0.0


@dataclass
class MetricsReport:
    """Everything the analyzer knows about one graph.

    Metrics that are undefined on the given graph (clustering of an empty
    graph, path length of a singleton component) are None rather than fake
    zeros.
    """

    node_count: int = 0
    edge_count: int = 0
    avg_degree: float = 0.0
    degrees: DegreeReport = field(default_factory=DegreeReport)
    components: ComponentCensus = field(default_factory=ComponentCensus)
    graph_acc: float | None = None
    main_component_acc: float | None = None
    main_component_aspl: float | None = None
    max_degree_fraction_of_main_component: float = 0.0
    aspl_method: str = "exact"
    aspl_sample_sources: int | None = None
    timings: dict = field(default_factory=dict, compare=False)

    def to_json_dict(self) -> dict:
        return {
            "node_count": self.node_count,
            "edge_count": self.edge_count,
            "avg_degree": self.avg_degree,
            "degrees": {
                "in": [[d, c] for d, c in sorted(self.degrees.in_histogram.items())],
                "out": [[d, c] for d, c in sorted(self.degrees.out_histogram.items())],
                "total": [[d, c] for d, c
                          in sorted(self.degrees.total_histogram.items())],
                "zero_in_fraction": self.degrees.zero_in_fraction,
                "zero_out_fraction": self.degrees.zero_out_fraction,
                "max_degree": self.degrees.max_degree,
                "max_degree_fraction_of_nodes":
                    self.degrees.max_degree_fraction_of_nodes,
                "max_degree_fraction_of_main_component":
                    self.max_degree_fraction_of_main_component,
            },
            "components": {
                "count": self.components.count,
                "sizes": self.components.sizes,
                "main_component_size": self.components.main_component_size,
                "main_component_fraction": self.components.main_component_fraction,
            },
            "graph_acc": self.graph_acc,
            "main_component_acc": self.main_component_acc,
            "main_component_aspl": self.main_component_aspl,
            "aspl_method": self.aspl_method,
            "aspl_sample_sources": self.aspl_sample_sources,
            "timings_seconds": self.timings,
        }


def degree_distributions(graph: InteractionGraph) -> DegreeReport:
    """Histogram the directed activity counters and the undirected degree."""
    n = graph.node_count
    report = DegreeReport(
        in_histogram=dict(Counter(graph.in_tx[1:])),
        out_histogram=dict(Counter(graph.out_tx[1:])),
        total_histogram=dict(Counter(len(graph.adj[v]) for v in graph.node_ids())),
    )
    if n:
        report.zero_in_fraction = report.in_histogram.get(0, 0) / n
        report.zero_out_fraction = report.out_histogram.get(0, 0) / n
        report.max_degree = max(report.total_histogram)
        report.max_degree_fraction_of_nodes = report.max_degree / n
    return report


def connected_components(graph: InteractionGraph,
                         ) -> tuple[ComponentCensus, list[int | None]]:
    """Union-find over the edge set.

    Returns the census and a per-node label list (index 0 unused); labels
    number components 0, 1, ... in decreasing size, ties broken by smallest
    member ID, so label 0 is always the main component.
    """
    n = graph.node_count
    parent = list(range(n + 1))
    size = [1] * (n + 1)

    def find(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    for a, b in graph.edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            if size[ra] < size[rb]:
                ra, rb = rb, ra
            parent[rb] = ra
            size[ra] += size[rb]

    roots: dict[int, int] = {}
    for v in graph.node_ids():
        root = find(v)
        if root not in roots:
            roots[root] = v
    ordered = sorted(roots, key=lambda r: (-size[r], roots[r]))
    label_of_root = {root: i for i, root in enumerate(ordered)}
    labels: list[int | None] = [None] * (n + 1)
    for v in graph.node_ids():
        labels[v] = label_of_root[find(v)]

    sizes = [size[root] for root in ordered]
    census = ComponentCensus(count=len(sizes), sizes=sizes)
    if sizes:
        census.main_component_size = sizes[0]
        census.main_component_fraction = sizes[0] / n
    return census, labels


def main_component_nodes(graph: InteractionGraph) -> list[int]:
    _, labels = connected_components(graph)
    return [v for v in graph.node_ids() if labels[v] == 0]


def local_clustering(graph: InteractionGraph, node: int) -> float:
    """Fraction of the node's neighbor pairs that are themselves linked.

    Nodes of degree < 2 have no neighbor pairs and count as 0.
    """
    neighbors = graph.neighbors(node)
    d = len(neighbors)
    if d < 2:
        return 0.0
    links = sum(len(graph.adj[v] & neighbors) for v in neighbors) // 2
    return 2.0 * links / (d * (d - 1))


def average_clustering(graph: InteractionGraph,
                       nodes: Sequence[int] | None = None, *,
                       executor: ThreadPoolExecutor | None = None) -> float:
    """Mean local clustering over ``nodes`` (default: every node)."""
    nodes = list(graph.node_ids()) if nodes is None else list(nodes)
    if not nodes:
        raise UndefinedMetricError("clustering is undefined on an empty node set")

    def part(chunk: list[int]) -> float:
        return math.fsum(local_clustering(graph, v) for v in chunk)

    chunks = [nodes[i:i + _NODE_CHUNK] for i in range(0, len(nodes), _NODE_CHUNK)]
    mapper = executor.map if executor is not None else map
    return math.fsum(mapper(part, chunks)) / len(nodes)


def _bfs_distance_sum(graph: InteractionGraph, source: int) -> int:
    dist = [-1] * len(graph.adj)
    dist[source] = 0
    queue = deque([source])
    total = 0
    while queue:
        v = queue.popleft()
        for w in graph.adj[v]:
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                total += dist[w]
                queue.append(w)
    return total


def aspl(graph: InteractionGraph, component_nodes: Sequence[int], *,
         sample_sources: int | None = None, seed: int = 0,
         executor: ThreadPoolExecutor | None = None) -> float:
    """Mean shortest-path length over node pairs of one connected component.

    Exact by default (one BFS per node).  With ``sample_sources`` k < |C| the
    mean is estimated from k seeded-random BFS sources; the estimate averages
    each sampled source against all other nodes.
    """
    nodes = sorted(component_nodes)
    k = len(nodes)
    if k < 2:
        raise UndefinedMetricError(
            "path length is undefined on components of fewer than 2 nodes")
    if sample_sources is not None and sample_sources < k:
        sources = random.Random(seed).sample(nodes, sample_sources)
    else:
        sources = nodes

    def part(chunk: list[int]) -> int:
        return sum(_bfs_distance_sum(graph, s) for s in chunk)

    chunks = [sources[i:i + _NODE_CHUNK] for i in range(0, len(sources), _NODE_CHUNK)]
    mapper = executor.map if executor is not None else map
    total = sum(mapper(part, chunks))
    return total / (len(sources) * (k - 1))


def analyze(graph: InteractionGraph, worker_count: int = 1, *,
            sample_sources: int | None = None, seed: int = 0) -> MetricsReport:
    """Full metric sweep over one graph.

    The result is a pure function of the graph (plus the sampling knobs);
    worker_count only changes wall time.
    """
    if worker_count < 1:
        raise ValueError(f"worker count must be >= 1, got {worker_count}")
    n = graph.node_count
    m = graph.edge_count
    report = MetricsReport(node_count=n, edge_count=m,
                           avg_degree=(2.0 * m / n) if n else 0.0)

    clock = time.perf_counter
    start = clock()
    report.degrees = degree_distributions(graph)
    report.timings["degrees"] = clock() - start

    start = clock()
    census, labels = connected_components(graph)
    report.components = census
    report.timings["components"] = clock() - start
    main = [v for v in graph.node_ids() if labels[v] == 0]
    if census.main_component_size:
        report.max_degree_fraction_of_main_component = (
            report.degrees.max_degree / census.main_component_size)

    executor = ThreadPoolExecutor(max_workers=worker_count) if worker_count > 1 else None
    try:
        start = clock()
        if n:
            report.graph_acc = average_clustering(graph, executor=executor)
            report.main_component_acc = average_clustering(graph, main,
                                                           executor=executor)
        report.timings["clustering"] = clock() - start

        start = clock()
        if len(main) >= 2:
            sampled = sample_sources is not None and sample_sources < len(main)
            report.aspl_method = "sampled" if sampled else "exact"
            report.aspl_sample_sources = sample_sources if sampled else None
            report.main_component_aspl = aspl(graph, main,
                                              sample_sources=sample_sources,
                                              seed=seed, executor=executor)
        report.timings["aspl"] = clock() - start
    finally:
        if executor is not None:
            executor.shutdown()
    return report

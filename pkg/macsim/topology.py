"""
Unit-disk topologies and the data-gathering tree used for converge-cast
routing and D-MAC levels.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Tuple

import networkx as nx

from .errors import TopologyError

logger = logging.getLogger(__name__)

# Absorbs floating point error in distances that sit exactly on the range.
RANGE_EPSILON = 1e-9


class Topology:
    """
    Node positions plus the symmetric link set they induce.

    Args:
        positions: node id -> (x, y) in meters
        range_m: radio range R; link(a, b) iff dist(a, b) <= R
    """

    def __init__(self, positions: Dict[int, Tuple[float, float]], range_m: float):
        if not positions:
            raise TopologyError("topology has no nodes")
        if range_m <= 0:
            raise TopologyError("radio range must be positive")
        self.range_m = float(range_m)
        self.positions = dict(positions)
        self.graph = nx.Graph()
        self.graph.add_nodes_from(sorted(self.positions))
        ids = sorted(self.positions)
        for i, a in enumerate(ids):
            for b in ids[i + 1:]:
                if self.distance(a, b) <= self.range_m + RANGE_EPSILON:
                    self.graph.add_edge(a, b)

    @property
    def nodes(self) -> List[int]:
        return sorted(self.graph.nodes)

    @property
    def links(self) -> List[Tuple[int, int]]:
        return sorted(tuple(sorted(edge)) for edge in self.graph.edges)

    def distance(self, a: int, b: int) -> float:
        (xa, ya), (xb, yb) = self.positions[a], self.positions[b]
        return math.hypot(xa - xb, ya - yb)

    def neighbors(self, node: int) -> List[int]:
        return sorted(self.graph.neighbors(node))

    def neighbor_map(self) -> Dict[int, List[int]]:
        return {node: self.neighbors(node) for node in self.nodes}

    def is_connected(self) -> bool:
        return nx.is_connected(self.graph)

    def validate(self) -> None:
        """
        Raises:
            TopologyError: if the link graph is disconnected
        """
        if not self.is_connected():
            parts = nx.number_connected_components(self.graph)
            raise TopologyError(f"topology is disconnected ({parts} components, range {self.range_m} m)")


def build_grid(rows: int, cols: int, spacing: float, range_m: float) -> Topology:
    """
    rows x cols lattice; node id = row * cols + col.

    Raises:
        TopologyError: bad dimensions or a disconnected result
    """
    if rows < 1 or cols < 1:
        raise TopologyError(f"grid needs rows, cols >= 1, got {rows}x{cols}")
    positions = {r * cols + c: (c * spacing, r * spacing) for r in range(rows) for c in range(cols)}
    topology = Topology(positions, range_m)
    topology.validate()
    return topology


def build_line(count: int, spacing: float, range_m: float) -> Topology:
    """`count` nodes on a line, node 0 at the origin."""
    if count < 1:
        raise TopologyError(f"line needs count >= 1, got {count}")
    topology = Topology({i: (i * spacing, 0.0) for i in range(count)}, range_m)
    topology.validate()
    return topology


@dataclass(frozen=True)
class GatheringTree:
    """Breadth-first routing tree towards the sink."""
    root: int
    parent: Dict[int, int]
    depth: Dict[int, int]

    @property
    def max_depth(self) -> int:
        return max(self.depth.values())

    @property
    def nodes(self) -> List[int]:
        return sorted(self.depth)

    def children(self, node: int) -> List[int]:
        return sorted(child for child, parent in self.parent.items() if parent == node)

    def path_to_root(self, node: int) -> List[int]:
        path = [node]
        while path[-1] != self.root:
            path.append(self.parent[path[-1]])
        return path


def build_gathering_tree(topology: Topology, root: int) -> GatheringTree:
    """
    BFS tree from `root`; among equally deep candidate parents the
    smallest node id wins.
    """
    if root not in topology.graph:
        raise TopologyError(f"root {root} is not a node of the topology")
    topology.validate()
    depth = dict(nx.single_source_shortest_path_length(topology.graph, root))
    parent = {}
    for node in sorted(depth):
        if node == root:
            continue
        parent[node] = min(nbr for nbr in topology.neighbors(node) if depth[nbr] == depth[node] - 1)
    logger.debug("gathering tree rooted at %d, depth %d", root, max(depth.values()))
    return GatheringTree(root=root, parent=parent, depth=depth)

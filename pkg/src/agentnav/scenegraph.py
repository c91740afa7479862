"""Layered directed scene graph built up during exploration.

Layers: objects, traversable areas, regions, and a sensor layer that links
each stored observation to what it saw. Labels are open-set strings; matching
is plain token containment.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from .geometry import Cell

IN_REGION = "in_region"
OBSERVES = "observes"


class Layer(str, Enum):
    OBJECT = "object"
    TRAVERSABLE = "traversable"
    REGION = "region"
    SENSOR = "sensor"


class SceneGraphError(ValueError):
    pass


def normalize_label(label: str) -> str:
    return " ".join(re.findall(r"[a-z0-9]+", label.lower()))


def label_matches(query: str, label: str) -> bool:
    """Equal, or the query's tokens appear contiguously in the label."""
    q = normalize_label(query).split()
    toks = normalize_label(label).split()
    if not q:
        return False
    return any(toks[i : i + len(q)] == q for i in range(len(toks) - len(q) + 1))


@dataclass
class SceneNode:
    id: str
    layer: Layer
    label: str
    cell: Cell | None = None
    rect: tuple[int, int, int, int] | None = None
    first_seen: int = 0
    observation_refs: list[int] = field(default_factory=list)

    @property
    def anchor(self) -> tuple[float, float]:
        """Point used for distances: the cell, or a region's rectangle center."""
        if self.cell is not None:
            return (float(self.cell[0]), float(self.cell[1]))
        r0, c0, r1, c1 = self.rect  # type: ignore[misc]
        return ((r0 + r1) / 2.0, (c0 + c1) / 2.0)

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "layer": self.layer.value,
            "label": self.label,
            "cell": list(self.cell) if self.cell is not None else None,
            "rect": list(self.rect) if self.rect is not None else None,
            "first_seen": self.first_seen,
            "observation_refs": list(self.observation_refs),
        }


class SceneGraph:
    def __init__(self, shape: tuple[int, int] | None = None):
        self.shape = shape
        self.nodes: dict[str, SceneNode] = {}
        self.edges: list[tuple[str, str, str]] = []
        self._edge_set: set[tuple[str, str, str]] = set()

    def add_node(self, node: SceneNode) -> SceneNode:
        if node.id in self.nodes:
            raise SceneGraphError(f"duplicate node id {node.id!r}")
        if self.shape is not None:
            for cell in _node_cells(node):
                if not (0 <= cell[0] < self.shape[0] and 0 <= cell[1] < self.shape[1]):
                    raise SceneGraphError(f"node {node.id!r} out of bounds")
        self.nodes[node.id] = node
        return node

    def add_edge(self, src: str, dst: str, relation: str) -> bool:
        if src not in self.nodes or dst not in self.nodes:
            raise SceneGraphError(f"edge endpoint missing: {src!r} -> {dst!r}")
        edge = (src, dst, relation)
        if edge in self._edge_set:
            return False
        self.edges.append(edge)
        self._edge_set.add(edge)
        return True

    def layer(self, layer: Layer) -> list[SceneNode]:
        return [n for n in self.nodes.values() if n.layer is layer]

    def region_of(self, node_id: str) -> SceneNode | None:
        for src, dst, rel in self.edges:
            if src == node_id and rel == IN_REGION:
                return self.nodes[dst]
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "nodes": [n.to_dict() for n in self.nodes.values()],
            "edges": [list(e) for e in self.edges],
            "layers": {layer.value: [n.id for n in self.layer(layer)] for layer in Layer},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict[str, Any], shape: tuple[int, int] | None = None) -> "SceneGraph":
        g = cls(shape)
        for raw in doc["nodes"]:
            g.add_node(
                SceneNode(
                    raw["id"],
                    Layer(raw["layer"]),
                    raw["label"],
                    tuple(raw["cell"]) if raw["cell"] is not None else None,  # type: ignore[arg-type]
                    tuple(raw["rect"]) if raw["rect"] is not None else None,  # type: ignore[arg-type]
                    raw["first_seen"],
                    list(raw["observation_refs"]),
                )
            )
        for src, dst, rel in doc["edges"]:
            g.add_edge(src, dst, rel)
        return g


def _node_cells(node: SceneNode) -> list[Cell]:
    if node.cell is not None:
        return [node.cell]
    if node.rect is not None:
        return [(node.rect[0], node.rect[1]), (node.rect[2], node.rect[3])]
    return []


def _in_rect(cell: Cell, rect: tuple[int, int, int, int]) -> bool:
    return rect[0] <= cell[0] <= rect[2] and rect[1] <= cell[1] <= rect[3]


def _link_region(graph: SceneGraph, obj: SceneNode) -> None:
    for region in graph.layer(Layer.REGION):
        if obj.cell is not None and _in_rect(obj.cell, region.rect):  # type: ignore[arg-type]
            graph.add_edge(obj.id, region.id, IN_REGION)
            return


def add_region(
    graph: SceneGraph, region_id: str, label: str, rect: tuple[int, int, int, int], timestep: int = 0
) -> str:
    r0, c0, r1, c1 = rect
    if r0 > r1 or c0 > c1:
        raise SceneGraphError(f"inverted region rect {rect}")
    for other in graph.layer(Layer.REGION):
        o = other.rect
        if not (o[2] < r0 or r1 < o[0] or o[3] < c0 or c1 < o[1]):  # type: ignore[index]
            raise SceneGraphError(f"region {region_id!r} overlaps region {other.id!r}")
    graph.add_node(SceneNode(region_id, Layer.REGION, normalize_label(label), None, tuple(rect), timestep))
    for obj in graph.layer(Layer.OBJECT):
        if obj.cell is not None and _in_rect(obj.cell, rect):
            graph.add_edge(obj.id, region_id, IN_REGION)
    return region_id


def add_traversable(graph: SceneGraph, node_id: str, cell: Cell, timestep: int, label: str = "waypoint") -> str:
    if node_id in graph.nodes:
        node = graph.nodes[node_id]
        if timestep not in node.observation_refs:
            node.observation_refs.append(timestep)
        return node_id
    graph.add_node(SceneNode(node_id, Layer.TRAVERSABLE, label, cell, None, timestep, [timestep]))
    return node_id


def sensor_node_id(timestep: int) -> str:
    return f"sensor:{timestep}"


def upsert_from_observation(graph: SceneGraph, obs, targets: list[str]) -> list[str]:
    """Add or refresh Object nodes for detections matching the perception targets.

    An empty target list perceives everything. The observation always gets a
    Sensor node, linked to every object it contributed.
    """
    sid = sensor_node_id(obs.timestep)
    if sid not in graph.nodes:
        graph.add_node(
            SceneNode(sid, Layer.SENSOR, "sensor", obs.robot_cell, None, obs.timestep, [obs.timestep])
        )
    touched = []
    for det in obs.detections:
        if targets and not any(label_matches(t, det.label) for t in targets):
            continue
        node = graph.nodes.get(det.object_id)
        if node is None:
            node = graph.add_node(
                SceneNode(det.object_id, Layer.OBJECT, normalize_label(det.label), det.cell, None, obs.timestep)
            )
            _link_region(graph, node)
        if obs.timestep not in node.observation_refs:
            node.observation_refs.append(obs.timestep)
        graph.add_edge(sid, node.id, OBSERVES)
        touched.append(node.id)
    return touched


def query_by_label(graph: SceneGraph, label: str, region: str | None = None) -> list[SceneNode]:
    """Object/region/traversable nodes matching ``label``, oldest first.

    With ``region``, only nodes linked ``in_region`` to a region whose label
    matches it are kept.
    """
    out = []
    for node in graph.nodes.values():
        if node.layer is Layer.SENSOR or not label_matches(label, node.label):
            continue
        if region is not None:
            reg = graph.region_of(node.id)
            if reg is None or not label_matches(region, reg.label):
                continue
        out.append(node)
    out.sort(key=lambda n: (n.first_seen, n.id))
    return out

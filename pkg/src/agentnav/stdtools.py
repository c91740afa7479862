"""The standard 12-tool registry (perception, reasoning utilities, navigation).

Handlers take the episode context, which provides ``world``, ``grid``,
``graph`` (None when the scene graph is ablated), ``memory``, ``backend``,
``observations``, ``detections_only`` and ``sense()``.
"""

from __future__ import annotations

from typing import Any

from .geometry import Cell, normalize_heading
from .mapping import render_raster
from .memory import Landmark
from .navtools import ExplorationComplete, explore_frontiers, proximity, reachable, shortest_path_length, visibility
from .scenegraph import Layer, query_by_label
from .toolbus import NavGoal, Param, ToolOutput, ToolRegistry, ToolSchema
from .worldsim import rotate_robot

STANDARD_TOOLS = (
    "get_images",
    "query_scene_graph",
    "get_occupancy_raster",
    "goto",
    "rotate",
    "follow_path",
    "explore_frontiers",
    "shortest_path_length",
    "visibility_check",
    "reachable",
    "proximity",
    "label_cells",
)
GRAPH_TOOLS = ("query_scene_graph", "proximity", "label_cells")
RASTER_TOOLS = ("get_occupancy_raster", "label_cells")


def _fmt_cell(c: Cell) -> str:
    return f"({c[0]},{c[1]})"


def _need_graph(ctx):
    if ctx.graph is None:
        raise RuntimeError("scene graph unavailable")
    return ctx.graph


def get_images(ctx, args: dict[str, Any]) -> ToolOutput:
    t = args["timestep"]
    if not 0 <= t < len(ctx.observations):
        raise IndexError(f"no observation at timestep {t} (have 0..{len(ctx.observations) - 1})")
    obs = ctx.observations[t]
    text = obs.detection_text() if ctx.detections_only else obs.rendered_view
    return ToolOutput(text, [d.object_id for d in obs.detections])


def query_scene_graph(ctx, args: dict[str, Any]) -> ToolOutput:
    nodes = query_by_label(_need_graph(ctx), args["label"], args.get("region"))
    if not nodes:
        return ToolOutput(f"no node matches {args['label']!r}", [])
    lines = []
    for n in nodes:
        where = _fmt_cell(n.cell) if n.cell is not None else f"rect {list(n.rect)}"
        region = ctx.graph.region_of(n.id)
        inside = f" in {region.label}" if region is not None else ""
        lines.append(f"{n.id}: {n.label} [{n.layer.value}] at {where}{inside}, first seen t={n.first_seen}")
    return ToolOutput("\n".join(lines), [n.id for n in nodes])


def get_occupancy_raster(ctx, args: dict[str, Any]) -> ToolOutput:
    return ToolOutput(render_raster(ctx.grid, ctx.memory.landmarks, ctx.world.robot_cell))


def goto(ctx, args: dict[str, Any]) -> ToolOutput:
    if args.get("z", 0) != 0:
        raise ValueError("z must be 0 in a planar world")
    cell = (args["x"], args["y"])
    if not ctx.grid.in_bounds(cell):
        raise ValueError(f"goal {_fmt_cell(cell)} out of bounds")
    return ToolOutput(f"navigation goal {_fmt_cell(cell)}", list(cell), NavGoal(cell))


def rotate(ctx, args: dict[str, Any]) -> ToolOutput:
    pose = rotate_robot(ctx.world, args["theta"])
    obs = ctx.sense()
    return ToolOutput(f"heading {normalize_heading(pose.heading):g}\n{ctx.view_text(obs)}", obs.timestep)


def resolve_node(ctx, ref: str) -> Cell:
    """A node id, a scene-graph label, or a landmark name, in that order."""
    if ctx.graph is not None:
        node = ctx.graph.nodes.get(ref)
        if node is not None and node.layer is not Layer.SENSOR:
            return node.cell if node.cell is not None else _rect_center(node.rect)
        hits = [n for n in query_by_label(ctx.graph, ref) if n.layer is Layer.OBJECT]
        if hits:
            return hits[0].cell
    lm = ctx.memory.landmark(ref)
    if lm is not None:
        return lm.cell
    raise KeyError(f"unknown node {ref!r}")


def _rect_center(rect) -> Cell:
    return ((rect[0] + rect[2]) // 2, (rect[1] + rect[3]) // 2)


def follow_path_tool(ctx, args: dict[str, Any]) -> ToolOutput:
    cell = resolve_node(ctx, args["node"])
    return ToolOutput(f"navigation goal {args['node']} at {_fmt_cell(cell)}", list(cell), NavGoal(cell))


def explore_frontiers_tool(ctx, args: dict[str, Any]) -> ToolOutput:
    goal = explore_frontiers(ctx.grid, ctx.backend, ctx.memory, ctx.world.robot_cell)
    if goal is ExplorationComplete:
        return ToolOutput("exploration complete: no frontiers remain", False)
    return ToolOutput(f"exploring frontier at {_fmt_cell(goal)}", list(goal), NavGoal(goal, explore=True))


def shortest_path_length_tool(ctx, args: dict[str, Any]) -> ToolOutput:
    d = shortest_path_length(ctx.grid, args["a"], args["b"])
    return ToolOutput("no path" if d is None else f"{d:.2f} m", d)


def visibility_check(ctx, args: dict[str, Any]) -> ToolOutput:
    v = visibility(ctx.grid, args["a"], args["b"])
    return ToolOutput("visible" if v else "not visible", v)


def reachable_tool(ctx, args: dict[str, Any]) -> ToolOutput:
    v = reachable(ctx.grid, args["a"], args["b"])
    return ToolOutput("reachable" if v else "not reachable", v)


def proximity_tool(ctx, args: dict[str, Any]) -> ToolOutput:
    graph = _need_graph(ctx)
    ref = args["node"]
    if ref not in graph.nodes:
        hits = [n for n in query_by_label(graph, ref) if n.layer is Layer.OBJECT]
        if not hits:
            raise KeyError(f"unknown node {ref!r}")
        ref = hits[0].id
    ids = proximity(graph, ref, args["radius_m"], ctx.grid.resolution, args.get("label"))
    return ToolOutput(", ".join(ids) if ids else "nothing nearby", ids)


def label_cells(ctx, args: dict[str, Any]) -> ToolOutput:
    graph = _need_graph(ctx)
    marks = list(ctx.memory.landmarks)
    found: dict[str, list[list[int]]] = {}
    for label in args["labels"]:
        cells = [list(n.cell) for n in query_by_label(graph, label) if n.layer is Layer.OBJECT]
        found[label] = cells
        for i, c in enumerate(cells):
            marks.append(Landmark(label if len(cells) == 1 else f"{label} {i + 1}", (c[0], c[1])))
    raster = render_raster(ctx.grid, marks, ctx.world.robot_cell)
    return ToolOutput(raster, found)


_CELL_A = Param("a", "cell", "first cell [row, col]")
_CELL_B = Param("b", "cell", "second cell [row, col]")

SCHEMAS: dict[str, tuple[ToolSchema, Any]] = {
    "get_images": (
        ToolSchema(
            "get_images",
            "Textual rendering of the sensor view recorded at a timestep (detections and local map patch).",
            (Param("timestep", "integer", "observation index, 0 is the first observation"),),
            "view text",
            "perception",
        ),
        get_images,
    ),
    "query_scene_graph": (
        ToolSchema(
            "query_scene_graph",
            "Find scene-graph nodes whose label contains the query words, oldest first.",
            (
                Param("label", "string", "open-set object or region label, e.g. 'sofa'"),
                Param("region", "string", "only nodes inside a region with this label", required=False),
            ),
            "matching nodes (empty when none)",
            "perception",
        ),
        query_scene_graph,
    ),
    "get_occupancy_raster": (
        ToolSchema(
            "get_occupancy_raster",
            "Top-down occupancy grid with landmarks and the robot marked.",
            (),
            "raster text",
            "perception",
        ),
        get_occupancy_raster,
    ),
    "goto": (
        ToolSchema(
            "goto",
            "Navigate to a cell with A*; x is the row, y the column, z must be 0.",
            (
                Param("x", "integer", "goal row"),
                Param("y", "integer", "goal column"),
                Param("z", "integer", "height, always 0"),
            ),
            "navigation goal",
            "navigation",
        ),
        goto,
    ),
    "rotate": (
        ToolSchema(
            "rotate",
            "Turn in place by theta degrees (clockwise positive) and take an observation.",
            (Param("theta", "number", "rotation in degrees"),),
            "new heading and the resulting view",
            "navigation",
        ),
        rotate,
    ),
    "follow_path": (
        ToolSchema(
            "follow_path",
            "Navigate to a scene-graph node, an object label, or a memory landmark.",
            (Param("node", "string", "node id, object label, or landmark name"),),
            "navigation goal",
            "navigation",
        ),
        follow_path_tool,
    ),
    "explore_frontiers": (
        ToolSchema(
            "explore_frontiers",
            "Pick a frontier of unexplored space and navigate to it, looking around on arrival.",
            (),
            "navigation goal, or false when exploration is complete",
            "navigation",
        ),
        explore_frontiers_tool,
    ),
    "shortest_path_length": (
        ToolSchema(
            "shortest_path_length",
            "Length of the shortest known-free path between two cells.",
            (_CELL_A, _CELL_B),
            "meters, or no path",
            "reasoning",
        ),
        shortest_path_length_tool,
    ),
    "visibility_check": (
        ToolSchema(
            "visibility_check",
            "Whether the straight segment between two cells crosses only known-free cells.",
            (_CELL_A, _CELL_B),
            "boolean",
            "reasoning",
        ),
        visibility_check,
    ),
    "reachable": (
        ToolSchema(
            "reachable",
            "Whether a known-free path connects two cells.",
            (_CELL_A, _CELL_B),
            "boolean",
            "reasoning",
        ),
        reachable_tool,
    ),
    "proximity": (
        ToolSchema(
            "proximity",
            "Objects and regions within a radius of a node, nearest first.",
            (
                Param("node", "string", "node id or object label"),
                Param("radius_m", "number", "search radius in meters"),
                Param("label", "string", "keep only nodes matching this label", required=False),
            ),
            "node ids",
            "reasoning",
        ),
        proximity_tool,
    ),
    "label_cells": (
        ToolSchema(
            "label_cells",
            "Mark the grid cells of objects with the given labels on the occupancy raster.",
            (Param("labels", "label-list", "object labels to mark"),),
            "annotated raster",
            "reasoning",
        ),
        label_cells,
    ),
}


def standard_registry(
    *, no_scene_graph: bool = False, no_raster: bool = False
) -> ToolRegistry:
    """All 12 standard tools, with ablated ones removed (and remembered as disabled)."""
    reg = ToolRegistry()
    for name in STANDARD_TOOLS:
        schema, handler = SCHEMAS[name]
        reg.register(schema, handler)
    removed = set()
    if no_scene_graph:
        removed |= set(GRAPH_TOOLS)
    if no_raster:
        removed |= set(RASTER_TOOLS)
    for name in STANDARD_TOOLS:
        if name in removed:
            reg.unregister(name)
    return reg

from __future__ import annotations

import json

import pytest

from agentnav.scenegraph import (
    IN_REGION,
    OBSERVES,
    Layer,
    SceneGraph,
    SceneGraphError,
    SceneNode,
    add_region,
    add_traversable,
    label_matches,
    query_by_label,
    upsert_from_observation,
)
from agentnav.worldsim import observe


@pytest.mark.parametrize(
    "query, label, expect",
    [
        ("sofa", "sofa", True),
        ("lamp", "floor lamp", True),
        ("Floor Lamp", "floor-lamp", True),
        ("lamp floor", "floor lamp", False),
        ("amp", "floor lamp", False),
        ("", "sofa", False),
    ],
)
def test_label_matching(query, label, expect):
    assert label_matches(query, label) is expect


def test_duplicate_and_bounds():
    g = SceneGraph((4, 4))
    g.add_node(SceneNode("a", Layer.OBJECT, "mug", (0, 0)))
    with pytest.raises(SceneGraphError, match="duplicate"):
        g.add_node(SceneNode("a", Layer.OBJECT, "mug", (1, 1)))
    with pytest.raises(SceneGraphError, match="out of bounds"):
        g.add_node(SceneNode("b", Layer.OBJECT, "mug", (4, 0)))
    with pytest.raises(SceneGraphError, match="endpoint missing"):
        g.add_edge("a", "zz", IN_REGION)


def test_edges_are_deduplicated():
    g = SceneGraph()
    g.add_node(SceneNode("a", Layer.OBJECT, "mug", (0, 0)))
    g.add_node(SceneNode("b", Layer.OBJECT, "cup", (0, 1)))
    assert g.add_edge("a", "b", "near")
    assert not g.add_edge("a", "b", "near")
    assert len(g.edges) == 1


def test_regions_link_objects_both_ways_round():
    g = SceneGraph()
    g.add_node(SceneNode("mug", Layer.OBJECT, "mug", (1, 1)))
    add_region(g, "kitchen", "kitchen", (0, 0, 2, 2))
    assert g.region_of("mug").id == "kitchen"
    with pytest.raises(SceneGraphError, match="overlaps"):
        add_region(g, "hall", "hall", (2, 2, 3, 3))
    with pytest.raises(SceneGraphError, match="inverted"):
        add_region(g, "x", "x", (3, 3, 2, 2))


def test_traversable_refreshes_refs():
    g = SceneGraph()
    add_traversable(g, "wp", (0, 0), 0)
    add_traversable(g, "wp", (0, 0), 4)
    assert g.nodes["wp"].observation_refs == [0, 4]


def test_upsert_from_observation(apartment):
    g = SceneGraph(apartment.shape)
    obs = observe(apartment, 360, 3.0, 0)
    touched = upsert_from_observation(g, obs, [])
    assert set(touched) == {d.object_id for d in obs.detections}
    assert "sensor:0" in g.nodes
    assert all(("sensor:0", t, OBSERVES) in g.edges for t in touched)
    # a second upsert of the same observation adds nothing
    n_nodes, n_edges = len(g.nodes), len(g.edges)
    upsert_from_observation(g, obs, [])
    assert (len(g.nodes), len(g.edges)) == (n_nodes, n_edges)


def test_targets_filter_perception(apartment):
    g = SceneGraph(apartment.shape)
    obs = observe(apartment, 360, 3.0, 0)
    touched = upsert_from_observation(g, obs, ["sofa"])
    assert touched == ["sofa_1"]
    assert [n.id for n in g.layer(Layer.OBJECT)] == ["sofa_1"]


def test_query_with_region(apartment):
    g = SceneGraph(apartment.shape)
    for room in apartment.rooms:
        add_region(g, room.id, room.label, room.rect)
    upsert_from_observation(g, observe(apartment, 360, 3.0, 0), [])
    assert [n.id for n in query_by_label(g, "sofa", "living room")] == ["sofa_1"]
    assert query_by_label(g, "sofa", "kitchen") == []
    assert [n.id for n in query_by_label(g, "kitchen")] == ["kitchen"]
    assert query_by_label(g, "sensor") == []


def test_dict_round_trip(apartment):
    g = SceneGraph(apartment.shape)
    for room in apartment.rooms:
        add_region(g, room.id, room.label, room.rect)
    upsert_from_observation(g, observe(apartment, 360, 3.0, 0), [])
    back = SceneGraph.from_dict(json.loads(g.to_json()), apartment.shape)
    assert back.to_json() == g.to_json()

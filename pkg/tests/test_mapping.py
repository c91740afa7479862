from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agentnav.geometry import FREE, OCCUPIED, UNKNOWN
from agentnav.mapping import (
    COORDINATE_KEY,
    LandmarkOverflow,
    OccupancyGrid,
    extract_frontiers,
    integrate,
    parse_raster,
    render_raster,
)
from agentnav.memory import Landmark
from agentnav.worldsim import GridWorld, Observation, Pose, move_robot, observe
from oracles import centroid_cell, frontier_clusters


def fake_obs(cells, shape=(5, 5)):
    return Observation(0, Pose(0, 0, 0), (0, 0), shape, tuple(cells), (), "")


def test_five_free_cells():
    g = OccupancyGrid(5, 5)
    integrate(g, fake_obs([((0, i), FREE) for i in range(5)]))
    assert g.known_count() == 5
    assert g.observed_count == 1


def test_integrate_idempotent():
    g = OccupancyGrid(5, 5)
    obs = fake_obs([((1, 1), FREE), ((1, 2), OCCUPIED)])
    integrate(g, obs)
    snapshot = g.cells.copy()
    integrate(g, obs)
    assert np.array_equal(g.cells, snapshot)


def test_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension mismatch"):
        integrate(OccupancyGrid(4, 4), fake_obs([], shape=(5, 5)))


def test_union_of_twenty_observations():
    rng = np.random.default_rng(3)
    occ = rng.random((15, 15)) < 0.2
    occ[7, 7] = False
    w = GridWorld(15, 15, occ, robot=Pose.at_cell((7, 7), 0, 0.25))
    g = OccupancyGrid(15, 15)
    union: dict = {}
    for t in range(20):
        obs = observe(w, 90, 3.0, t)
        integrate(g, obs)
        union.update(dict(obs.visible_cells))
        nbrs = [(w.robot_cell[0] + d[0], w.robot_cell[1] + d[1]) for d in ((0, 1), (1, 0), (0, -1), (-1, 0))]
        opts = [n for n in nbrs if w.in_bounds(n) and w.is_free(n)]
        move_robot(w, opts[int(rng.integers(len(opts)))])
    for r in range(15):
        for c in range(15):
            assert g.state((r, c)) == union.get((r, c), UNKNOWN)
            if (r, c) in union:  # soundness
                assert g.state((r, c)) == (OCCUPIED if occ[r, c] else FREE)


def test_fully_known_grid_has_no_frontiers():
    g = OccupancyGrid(4, 4)
    g.cells[:] = FREE
    assert extract_frontiers(g) == []


def test_single_diagonal_chain_is_one_cluster():
    g = OccupancyGrid(5, 5)
    for i in range(4):
        g.cells[i, i] = FREE
    fs = extract_frontiers(g)
    assert len(fs) == 1 and fs[0].size == 4


def _grid_strategy(max_side):
    return st.tuples(st.integers(1, max_side), st.integers(1, max_side), st.integers(0, 2**31 - 1))


@settings(max_examples=200, deadline=None)
@given(_grid_strategy(20))
def test_frontiers_match_definition(spec):
    h, w, seed = spec
    rng = np.random.default_rng(seed)
    g = OccupancyGrid(h, w)
    g.cells = rng.choice([UNKNOWN, FREE, OCCUPIED], size=(h, w)).astype(np.int8)
    fs = extract_frontiers(g)
    assert {frozenset(f.cells) for f in fs} == set(frontier_clusters(g.cells.tolist()))
    for f in fs:
        assert f.centroid == centroid_cell(list(f.cells))
    keys = [(-f.size, f.centroid) for f in fs]
    assert keys == sorted(keys)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_monotone_known_cells(seed):
    rng = np.random.default_rng(seed)
    g = OccupancyGrid(8, 8)
    known_before = set()
    for _ in range(5):
        cells = [((int(r), int(c)), int(rng.choice([FREE, OCCUPIED]))) for r, c in rng.integers(0, 8, (6, 2))]
        integrate(g, fake_obs(cells, (8, 8)))
        known = {tuple(x) for x in np.argwhere(g.cells != UNKNOWN)}
        assert known_before <= known
        known_before = known


def test_raster_golden():
    g = OccupancyGrid(3, 4)
    g.cells[0, :] = OCCUPIED
    g.cells[1, :3] = FREE
    text = render_raster(g, [Landmark("sofa", (1, 0))], (1, 2))
    assert text == f"{COORDINATE_KEY}\n####\nA.R?\n????\nlegend:\nA: sofa (1,0)"


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_raster_inverse(seed):
    rng = np.random.default_rng(seed)
    g = OccupancyGrid(6, 7)
    g.cells = rng.choice([UNKNOWN, FREE, OCCUPIED], size=(6, 7)).astype(np.int8)
    lms = [Landmark(f"thing {i}", (int(rng.integers(6)), int(rng.integers(7)))) for i in range(3)]
    robot = (int(rng.integers(6)), int(rng.integers(7)))
    terrain, legend = parse_raster(render_raster(g, lms, robot))
    marked = {lm.cell for lm in lms} | {robot}
    for r in range(6):
        for c in range(7):
            if (r, c) not in marked:
                assert terrain[r, c] == g.cells[r, c]
    assert legend["A"] == ("thing 0", lms[0].cell)


def test_landmark_overflow():
    g = OccupancyGrid(30, 30)
    with pytest.raises(LandmarkOverflow, match="landmark alphabet exhausted"):
        render_raster(g, [Landmark(f"l{i}", (i, i)) for i in range(27)], None)

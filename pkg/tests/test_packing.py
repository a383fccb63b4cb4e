import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import box_group, l_tromino, make_group
from mechpack import fixtures
from mechpack.disassembly import rest_group
from mechpack.errors import DoesNotFit, EmptyLayout
from mechpack.geometry.intersect import meshes_intersect
from mechpack.geometry.mesh import icosphere, mesh_volume, transform_mesh
from mechpack.packing import (
    ORIENTATIONS,
    BoxSpec,
    PackingLayout,
    find_holes,
    footprint,
    pack_all,
    place_group,
    sort_groups,
    utilization,
)
from builders import SHAPE_NAMES, check_layout, distinct_footprints, random_groups, replay, shape
from oracles import brute_force_min_height, reference_place, sliding_free


def layout_with(occ, box):
    """Layout whose occupancy is ``occ``, claimed by a dummy placement 0."""
    lay = PackingLayout(box)
    lay.claims = np.where(np.asarray(occ, dtype=bool), 0, -1).astype(np.int32)
    return lay


# ---------------------------------------------------------------- boxspec


def test_boxspec_defaults_and_grid():
    b = BoxSpec(2.0, 1.0)
    assert b.cell_size == pytest.approx(1.0 / 64)
    assert b.grid_xy == (128, 64)
    assert BoxSpec.trial(2.0, 1.0).cell_size == pytest.approx(1.0 / 32)
    assert BoxSpec(1.0, 1.0, 0.3).grid_xy == (4, 4)
    assert BoxSpec(0.3, 0.3, 0.1).grid_xy == (3, 3)  # 0.3 / 0.1 is 2.9999999999999996


def test_boxspec_rejects_bad_dims():
    for args in ((0, 1), (1, -1), (1, 1, 0), (0.5, 1, 1)):
        with pytest.raises(ValueError):
            BoxSpec(*args)


def test_orientation_set():
    assert len(ORIENTATIONS) == 24
    assert np.array_equal(ORIENTATIONS[0], np.eye(3))
    keys = {m.astype(int).tobytes() for m in ORIENTATIONS}
    assert len(keys) == 24
    for m in ORIENTATIONS:
        assert np.linalg.det(m) == pytest.approx(1.0)


# ------------------------------------------------------------------- sort


def test_sort_by_longest_edge():
    gs = [box_group((3, 0.5, 0.5), "a"), box_group((1, 0.5, 0.5), "b"), box_group((2, 0.5, 0.5), "c")]
    assert [g.part_ids[0][0] for g in sort_groups(gs)] == ["a", "c", "b"]


def test_sort_ties_by_volume_then_ids():
    big, small = box_group((2, 2, 2), "big"), box_group((2, 0.5, 1), "small")
    assert sort_groups([small, big]) == [big, small]
    x, y = box_group((1, 1, 1), "x"), box_group((1, 1, 1), "y")
    assert sort_groups([y, x]) == [x, y]
    assert sort_groups([x]) == [x]


# -------------------------------------------------------------- footprint


def test_unit_cube_footprint_every_orientation():
    g = shape("111")
    for o in range(24):
        fp = footprint(g, o, 0.5)
        assert fp.dims == (2, 2, 2) and fp.occupancy.all()


def test_l_tromino_footprint():
    fp = footprint(shape("L"), 0, 1.0)
    assert sorted(fp.dims) == [1, 2, 2]
    assert fp.cells == 3
    flat = fp.occupancy.reshape(2, 2) if fp.dims[2] == 1 else fp.occupancy.squeeze()
    assert flat.sum() == 3  # an L, not a full block


def test_footprint_is_conservative():
    g = box_group((1.0, 0.6, 0.3))
    for o in range(24):
        fp = footprint(g, o, 0.25)
        assert fp.cells * 0.25 ** 3 >= g.material_volume - 1e-9
        assert sorted(fp.dims) == [2, 3, 4]


def test_column_bottoms():
    fp = footprint(shape("L"), 0, 1.0)
    b = fp.column_bottoms
    assert b.shape == fp.dims[:2]
    assert (b >= 0).sum() == len(np.argwhere(fp.occupancy.any(axis=2)))


# ------------------------------------------------------------------ holes


def test_no_holes_in_empty_layout():
    assert find_holes(PackingLayout(BoxSpec(2, 2, 1))) == []


def test_corner_block_leaves_one_hole():
    box = BoxSpec(4, 4, 1)
    lay = PackingLayout(box)
    g = box_group((2, 2, 2))
    lay.add(g, place_group(lay, g))
    assert lay.h == 2
    (hole,) = find_holes(lay)
    assert hole.count == 4 * 4 * 2 - 8
    assert hole.volume == pytest.approx(24.0)


def test_full_slab_has_no_holes():
    occ = np.ones((3, 3, 2), dtype=bool)
    assert find_holes(layout_with(occ, BoxSpec(3, 3, 1))) == []


def test_holes_are_six_connected():
    occ = np.ones((2, 2, 1), dtype=bool)
    occ[0, 0, 0] = occ[1, 1, 0] = False  # diagonal neighbours only
    holes = find_holes(layout_with(occ, BoxSpec(2, 2, 1)))
    assert [h.count for h in holes] == [1, 1]
    assert [h.anchor for h in holes] == [(0, 0, 0), (1, 1, 0)]


# ------------------------------------------------------------------ rules


def test_empty_box_rule_three():
    lay = PackingLayout(BoxSpec(2, 2, 1))
    p = place_group(lay, shape("111"))
    assert p.cell_anchor == (0, 0, 0) and p.rule == 3
    lay.add(shape("111"), p)
    assert lay.h == 1


def test_corner_hole_rule_one():
    occ = np.ones((2, 2, 2), dtype=bool)
    occ[0, 0, 0] = False
    lay = layout_with(occ, BoxSpec(2, 2, 1))
    p = place_group(lay, shape("111"))
    assert p.rule == 1 and p.cell_anchor == (0, 0, 0)
    lay.add(shape("111"), p)
    assert lay.h == 2


def test_rule_one_prefers_closest_hole_volume():
    # a 3-cell hole low on the left, a 1-cell pocket up on the right
    occ = np.ones((4, 1, 2), dtype=bool)
    occ[0:3, 0, 0] = False
    occ[3, 0, 1] = False
    lay = layout_with(occ, BoxSpec(4, 1, 1))
    p = place_group(lay, shape("111"))
    assert p.rule == 1 and p.cell_anchor == (3, 0, 1)


def test_rule_two_minimises_underlying_free_cells():
    g = shape("L")
    # an orientation whose footprint is the flat L missing corner (1, 1)
    o = next(o for o in range(24)
             if footprint(g, o, 1.0).dims == (2, 2, 1) and not footprint(g, o, 1.0).occupancy[1, 1, 0])
    occ = np.zeros((4, 2, 2), dtype=bool)
    occ[0, 0, 0] = True
    occ[1, 1, :] = True  # left: (1,0,0) and (0,1,0) stay empty under z = 1
    occ[2:, :, 0] = True
    occ[3, 1, 1] = True  # right: a full platform at z = 1
    lay = layout_with(occ, BoxSpec(4, 2, 1))
    p = place_group(lay, g, orientations=[o])
    assert p.rule == 2
    assert p.cell_anchor == (2, 0, 1)  # (0, 0, 1) ties lower but leaves 2 empty cells beneath
    assert reference_place(occ, [(o, footprint(g, o, 1.0).occupancy)]) == (2, (2, 0, 1), o)
    lay.add(g, p)
    assert lay.h == 2


def test_rule_three_minimises_new_height():
    occ = np.zeros((2, 1, 3), dtype=bool)
    occ[0, 0, :3] = True
    occ[1, 0, :1] = True
    lay = layout_with(occ, BoxSpec(2, 1, 1))
    g = shape("211")
    p = place_group(lay, g)
    # a 2-bar stands in the low column without raising h; a 3-bar must stick out to 4
    assert p.rule == 1 and p.cell_anchor == (1, 0, 1)
    g3 = shape("311")
    p3 = place_group(lay, g3)
    assert p3.rule == 3 and p3.cell_anchor == (1, 0, 1)
    lay.add(g3, p3)
    assert lay.h == 4


def test_place_group_does_not_mutate():
    lay = PackingLayout(BoxSpec(2, 2, 1))
    place_group(lay, shape("111"))
    assert lay.placements == [] and lay.h == 0


def test_does_not_fit():
    big = box_group((3, 3, 3), "big")
    with pytest.raises(DoesNotFit):
        place_group(PackingLayout(BoxSpec(2, 2, 1)), big)
    with pytest.raises(DoesNotFit) as err:
        pack_all([shape("111"), big], BoxSpec(2, 2, 1))
    assert err.value.group_id == 1


# --------------------------------------------------------------- pack_all


def test_four_cubes_tile():
    cubes = [box_group((1, 1, 1), f"c{k}") for k in range(4)]
    lay = pack_all(cubes, BoxSpec(2, 2, 0.5))
    assert lay.h == pytest.approx(1.0)
    assert utilization(lay) == pytest.approx(1.0, abs=1e-9)
    check_layout(lay, cubes)


def test_bar_and_two_cubes():
    gs = [box_group((2, 1, 1), "bar"), box_group((1, 1, 1), "c0"), box_group((1, 1, 1), "c1")]
    box = BoxSpec(2, 2, 1)
    lay = pack_all(gs, box)
    assert lay.h == 1.0
    bf = brute_force_min_height([distinct_footprints(g, 1) for g in sort_groups(gs)], box.grid_xy, 4)
    assert bf == lay.height_cells
    check_layout(lay, gs)


def test_single_group_lies_flat():
    g = box_group((1.0, 0.5, 0.25))
    box = BoxSpec(2, 2, 0.25)
    lay = pack_all([g], box)
    best = min(footprint(g, o, 0.25).dims[2] for o in range(24))
    assert lay.height_cells == best == 1


def test_layout_json_shape():
    lay = pack_all([shape("111")], BoxSpec(2, 2, 1))
    d = lay.to_dict()
    assert set(d) == {"box", "h", "utilization", "placements"}
    (pl,) = d["placements"]
    assert set(pl) == {"group_index", "part_ids", "quaternion", "translation"}
    assert np.linalg.norm(pl["quaternion"]) == pytest.approx(1.0)
    assert lay.to_json() == pack_all([shape("111")], BoxSpec(2, 2, 1)).to_json()


def test_placed_meshes_inside_and_apart():
    gs = [shape("211"), shape("L"), shape("111"), shape("221")]
    box = BoxSpec(3, 3, 0.5)
    lay = pack_all(gs, box)
    check_layout(lay, gs)
    placed = []
    for g, p in zip(lay.groups, lay.placements):
        placed.append([transform_mesh(g.part_meshes[pid], p.transform.compose(g.part_poses[pid])) for pid in g.part_ids])
    for i in range(len(placed)):
        for j in range(i + 1, len(placed)):
            for a in placed[i]:
                for b in placed[j]:
                    assert not meshes_intersect(a, b, eps=box.cell_size / 2)


# ------------------------------------------------------------ utilization


def test_utilization_examples():
    lay = pack_all([shape("111")], BoxSpec(2, 2, 0.5))
    assert utilization(lay) == pytest.approx(0.25)
    with pytest.raises(EmptyLayout):
        utilization(PackingLayout(BoxSpec(2, 2, 1)))


def test_utilization_of_unit_sphere():
    sphere = icosphere(0.5, 3, (0.5, 0.5, 0.5))
    g = make_group([sphere], name="s")
    lay = pack_all([g], BoxSpec(1, 1))
    assert lay.h == pytest.approx(1.0)
    assert utilization(lay) == pytest.approx(mesh_volume(sphere), rel=1e-9)
    assert 0.5 < utilization(lay) < math.pi / 6


# ------------------------------------------------------------- invariants


@pytest.mark.parametrize("seed", range(10))
def test_invariants_and_rules_on_random_sets(seed):
    rng = np.random.default_rng(seed)
    gs = random_groups(rng, int(rng.integers(2, 6)))
    box = BoxSpec(float(rng.integers(3, 5)), float(rng.integers(3, 5)), 1.0)
    lay = replay(gs, box)
    check_layout(lay, gs)
    assert lay.to_json() == pack_all(gs, box).to_json()


@settings(max_examples=40)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(SHAPE_NAMES))
def test_place_group_matches_reference(seed, name):
    rng = np.random.default_rng(seed)
    occ = rng.random((3, 3, 3)) < rng.uniform(0.2, 0.8)
    g = shape(name)
    fps = [(o, footprint(g, o, 1.0).occupancy) for o in range(24)]
    lay = layout_with(occ, BoxSpec(3, 3, 1))
    p = place_group(lay, g)
    assert (p.rule, p.cell_anchor, p.orientation) == reference_place(occ, fps)
    fp = p.footprint.occupancy
    space = np.zeros((3, 3, lay.height_cells + fp.shape[2]), dtype=bool)
    space[:, :, :lay.height_cells] = occ[:, :, :lay.height_cells]
    assert sliding_free(space, fp)[p.cell_anchor]


@pytest.mark.parametrize("seed", range(8))
def test_brute_force_equivalence(seed):
    rng = np.random.default_rng(100 + seed)
    gs = random_groups(rng, int(rng.integers(1, 4)))
    box = BoxSpec(float(rng.integers(2, 5)), float(rng.integers(2, 5)), 1.0)
    try:
        lay = pack_all(gs, box)
    except DoesNotFit:
        pytest.skip("random set does not fit the base")
    bf = brute_force_min_height([distinct_footprints(g, 1.0) for g in sort_groups(gs)], box.grid_xy, 8)
    assert lay.height_cells == bf


@pytest.mark.xfail(strict=True, reason="greedy insertion is not optimal: the second L ignores the bar still to come")
def test_greedy_misses_two_l_and_bar_tiling():
    gs = [l_tromino("A"), l_tromino("B"), box_group((1, 1, 2), "c")]
    box = BoxSpec(4, 2, 1)
    bf = brute_force_min_height([distinct_footprints(g, 1.0) for g in sort_groups(gs)], box.grid_xy, 4)
    assert bf == 1
    assert pack_all(gs, box).height_cells == bf


@pytest.mark.parametrize("name", ["single_cube", "two_bar_hinge", "zigzag3", "slider_cubes", "gear_chain4"])
def test_finer_cells_never_cost_more_than_a_coarse_cell(name):
    m = getattr(fixtures, name)()
    g = rest_group(m)
    side = 2.0 * float(g.obb.half_extents.max()) + 0.1
    coarse = BoxSpec(side, side, side / 16)
    fine = BoxSpec(side, side, side / 32)
    hc = pack_all([g], coarse).h
    hf = pack_all([g], fine).h
    assert hf <= hc + coarse.cell_size + 1e-12

import math

import numpy as np
import pytest

from relpre.geom import (
    GridSpec,
    ObjectInstance,
    Scene,
    VoxelGrid,
    center_cell,
    desk_grid,
    paper_grid,
    pairwise_view,
    region_index,
    region_of_offsets,
    scene_grid,
    voxel_center_distance,
    voxelize,
)


def box(dims, pos, yaw=0.0):
    return ObjectInstance("cuboid", dims, pos, yaw)


def test_voxelize_aligned_cuboid_exact_count():
    # 0.04 m cube with faces on cell boundaries occupies exactly 4^3 cells.
    spec = GridSpec((10, 10, 10), 0.01, (0.0, 0.0, 0.0))
    grid = voxelize([box((0.04, 0.04, 0.04), (0.05, 0.05, 0.05))], spec)
    assert grid.occupied_count(0) == 64


def test_voxelize_sphere_count_close_to_volume():
    spec = GridSpec((16, 16, 16), 0.01, (0.0, 0.0, 0.0))
    sphere = ObjectInstance("sphere", (0.05, 0.05, 0.05), (0.08, 0.08, 0.08))
    grid = voxelize([sphere], spec)
    expected = (4.0 / 3.0) * math.pi * 0.05**3 / 0.01**3
    assert abs(grid.occupied_count(0) - expected) <= 0.10 * expected


def test_voxelize_cylinder_exact_radial_test():
    spec = GridSpec((20, 20, 20), 0.01, (0.0, 0.0, 0.0))
    cyl = ObjectInstance("cylinder", (0.05, 0.05, 0.06), (0.1, 0.1, 0.1))
    grid = voxelize([cyl], spec)
    expected = math.pi * 0.05**2 * 0.06 / 0.01**3
    assert abs(grid.occupied_count(0) - expected) <= 0.10 * expected


def test_voxelize_outside_object_flagged_not_fatal():
    spec = GridSpec((8, 8, 8), 0.01, (0.0, 0.0, 0.0))
    inside = box((0.03, 0.03, 0.03), (0.04, 0.04, 0.04))
    outside = box((0.03, 0.03, 0.03), (5.0, 5.0, 5.0))
    grid = voxelize([inside, outside], spec)
    assert grid.object_outside == (False, True)
    assert grid.occupied_count(1) == 0
    assert grid.occupied_count(0) > 0


def test_voxelize_requires_objects_and_origin():
    spec = GridSpec((8, 8, 8), 0.01, (0.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        voxelize([], spec)
    with pytest.raises(ValueError):
        voxelize([box((0.03, 0.03, 0.03), (0.0, 0.0, 0.0))], GridSpec((8, 8, 8), 0.01))


def test_voxelize_translation_consistency():
    spec = GridSpec((24, 24, 24), 0.01, (0.0, 0.0, 0.0))
    obj = box((0.05, 0.03, 0.04), (0.08, 0.08, 0.08), yaw=0.3)
    base = voxelize([obj], spec).channels[0]
    shift = np.array([3, -2, 4])
    moved = voxelize([obj.translated(shift * 0.01)], spec).channels[0]
    rolled = np.roll(base, shift, axis=(0, 1, 2))
    assert np.array_equal(moved, rolled)


def test_voxelize_deterministic():
    spec = GridSpec((16, 16, 16), 0.01, (0.0, 0.0, 0.0))
    objs = [box((0.05, 0.03, 0.04), (0.08, 0.08, 0.08), yaw=0.4),
            ObjectInstance("sphere", (0.03, 0.03, 0.03), (0.05, 0.1, 0.06))]
    a = voxelize(objs, spec)
    b = voxelize(objs, spec)
    assert np.array_equal(a.channels, b.channels)


def pair_scene(anchor_pos=(1.0, 2.0, 0.5), offset=(0.08, 0.0, 0.0)):
    anchor = box((0.06, 0.06, 0.06), anchor_pos)
    ref_pos = tuple(a + o for a, o in zip(anchor_pos, offset))
    referrant = box((0.05, 0.05, 0.05), ref_pos)
    return Scene((anchor, referrant))


def test_pairwise_view_centers_anchor():
    scene = pair_scene()
    view = pairwise_view(scene, 0, 1, desk_grid())
    cc = center_cell(view.grid.resolution)
    # Anchor centroid cell is the grid center cell, which is itself occupied.
    centroid = view.grid.channel_centroid_world(1)
    origin = np.asarray(view.grid.origin)
    cell = np.floor((centroid - origin) / view.grid.voxel_size).astype(int)
    assert tuple(cell) == cc
    assert view.grid.channels[1][cc]
    assert not view.clip


def test_pairwise_view_union_channel():
    view = pairwise_view(pair_scene(), 0, 1, desk_grid())
    assert np.array_equal(view.grid.channels[0],
                          view.grid.channels[1] | view.grid.channels[2])


def test_pairwise_view_swap_exchanges_masks():
    # Identical cubes offset along x: swapping roles exchanges the two object
    # channels after re-centering on the new anchor.
    anchor = box((0.05, 0.05, 0.05), (0.0, 0.0, 0.0))
    referrant = box((0.05, 0.05, 0.05), (0.08, 0.0, 0.0))
    scene = Scene((anchor, referrant))
    spec = GridSpec((33, 33, 33), 0.02)
    v12 = pairwise_view(scene, 0, 1, spec)
    v21 = pairwise_view(scene, 1, 0, spec)
    # In each view the anchor mask is the centered cube.
    assert np.array_equal(v12.grid.channels[1], v21.grid.channels[1])
    # Referrant masks sit on opposite sides: mirroring x maps one to the other.
    assert np.array_equal(v12.grid.channels[2], v21.grid.channels[2][::-1, :, :])


def test_pairwise_view_paper_scale_no_clip_at_half_meter():
    anchor = box((0.1, 0.1, 0.1), (0.0, 0.0, 0.0))
    referrant = box((0.1, 0.1, 0.1), (0.5, 0.0, 0.0))
    view = pairwise_view(Scene((anchor, referrant)), 0, 1, paper_grid())
    assert view.grid.channels.shape == (3, 100, 100, 100)
    assert not view.clip
    assert view.grid.occupied_count(2) > 0


def test_pairwise_view_far_referrant_sets_clip():
    anchor = box((0.06, 0.06, 0.06), (0.0, 0.0, 0.0))
    referrant = box((0.05, 0.05, 0.05), (0.5, 0.0, 0.0))
    view = pairwise_view(Scene((anchor, referrant)), 0, 1, desk_grid())
    assert view.clip


def test_pairwise_view_id_validation():
    scene = pair_scene()
    with pytest.raises(ValueError):
        pairwise_view(scene, 0, 0, desk_grid())
    with pytest.raises(ValueError):
        pairwise_view(scene, 0, 5, desk_grid())


def ref_grid_from_mask(mask, voxel_size=0.01, origin=(0.0, 0.0, 0.0)):
    return VoxelGrid(mask.shape, voxel_size, origin, mask[None].copy())


def test_region_index_above():
    spec = GridSpec((20, 20, 20), 0.01, (0.0, 0.0, 0.0))
    anchor = box((0.06, 0.06, 0.04), (0.1, 0.1, 0.05))
    referrant = box((0.04, 0.04, 0.04), (0.1, 0.1, 0.12))
    grid = voxelize([referrant], spec)
    assert region_index(anchor, grid) == region_of_offsets(0, 0, 1)


def test_region_index_side():
    spec = GridSpec((30, 30, 30), 0.01, (0.0, 0.0, 0.0))
    anchor = box((0.06, 0.06, 0.04), (0.1, 0.1, 0.05))
    referrant = box((0.04, 0.04, 0.04), (0.2, 0.1, 0.05))
    grid = voxelize([referrant], spec)
    assert region_index(anchor, grid) == region_of_offsets(1, 0, 0)


def test_region_index_tie_breaks_to_lowest():
    # Hand-built referrant mask with equal counts in regions (0,0,-1) and
    # (0,0,+1); the lower lexicographic index must win.
    spec = GridSpec((9, 9, 9), 0.01, (0.0, 0.0, 0.0))
    anchor = box((0.03, 0.03, 0.03), (0.045, 0.045, 0.045))
    mask = np.zeros((9, 9, 9), dtype=bool)
    mask[4, 4, 0] = True  # below
    mask[4, 4, 8] = True  # above
    grid = ref_grid_from_mask(mask)
    assert region_index(anchor, grid) == region_of_offsets(0, 0, -1)
    assert region_of_offsets(0, 0, -1) < region_of_offsets(0, 0, 1)


def test_region_index_empty_referrant_errors():
    anchor = box((0.03, 0.03, 0.03), (0.045, 0.045, 0.045))
    grid = ref_grid_from_mask(np.zeros((9, 9, 9), dtype=bool))
    with pytest.raises(ValueError, match="empty referrant"):
        region_index(anchor, grid)


def test_region_index_range_and_translation_invariance():
    rng = np.random.default_rng(7)
    for _ in range(25):
        a_dims = tuple(rng.uniform(0.03, 0.08, 3))
        r_dims = tuple(rng.uniform(0.02, 0.06, 3))
        offset = rng.uniform(-0.12, 0.12, 3)
        anchor = box(a_dims, (0.0, 0.0, 0.0))
        referrant = box(r_dims, tuple(offset))
        scene = Scene((anchor, referrant))
        spec = scene_grid(scene, 0.01)
        grid = voxelize(scene.objects, spec)
        if grid.occupied_count(1) == 0:
            continue
        idx = region_index(anchor, grid, channel=1)
        assert 0 <= idx <= 25
        t = rng.uniform(-2.0, 2.0, 3)
        moved = scene.translated(t)
        spec2 = scene_grid(moved, 0.01)
        grid2 = voxelize(moved.objects, spec2)
        assert region_index(moved.objects[0], grid2, channel=1) == idx


def test_voxel_center_distance_identical_and_offset():
    spec = GridSpec((20, 20, 20), 0.01, (0.0, 0.0, 0.0))
    a = box((0.04, 0.04, 0.04), (0.05, 0.05, 0.05))
    b = a.translated((0.10, 0.0, 0.0))
    grid = voxelize([a, b], spec)
    assert voxel_center_distance(grid, 0, grid, 0) == 0.0
    assert voxel_center_distance(grid, 0, grid, 1) == pytest.approx(0.10, abs=1e-12)


def test_voxel_center_distance_matches_brute_force():
    rng = np.random.default_rng(3)
    spec = GridSpec((24, 24, 24), 0.01, (0.0, 0.0, 0.0))
    for _ in range(10):
        a = box(tuple(rng.uniform(0.02, 0.06, 3)), tuple(rng.uniform(0.08, 0.16, 3)),
                yaw=float(rng.uniform(-0.5, 0.5)))
        b = box(tuple(rng.uniform(0.02, 0.06, 3)), tuple(rng.uniform(0.08, 0.16, 3)))
        grid = voxelize([a, b], spec)
        # Brute force: average occupied cell centers per channel directly.
        cents = []
        for c in range(2):
            idx = np.argwhere(grid.channels[c])
            pts = np.asarray(grid.origin) + (idx + 0.5) * 0.01
            cents.append(pts.mean(axis=0))
        expected = float(np.linalg.norm(cents[0] - cents[1]))
        assert voxel_center_distance(grid, 0, grid, 1) == pytest.approx(expected, rel=1e-12)


def test_voxel_center_distance_empty_errors():
    grid = ref_grid_from_mask(np.zeros((5, 5, 5), dtype=bool))
    with pytest.raises(ValueError, match="empty channel"):
        voxel_center_distance(grid, 0, grid, 0)


def test_object_instance_validation():
    with pytest.raises(ValueError):
        ObjectInstance("pyramid", (0.1, 0.1, 0.1), (0, 0, 0))
    with pytest.raises(ValueError):
        ObjectInstance("cuboid", (0.0, 0.1, 0.1), (0, 0, 0))
    with pytest.raises(ValueError):
        ObjectInstance("cuboid", (0.1, 0.1, 0.1), (0, 0, 0), yaw=4.0)
    with pytest.raises(ValueError):
        ObjectInstance("cylinder", (0.1, 0.2, 0.1), (0, 0, 0))

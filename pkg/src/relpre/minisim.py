"""Deterministic quasi-static interaction model: perturbation sweeps with
contact extraction, block-stack stability, and the line-sweep oracle.

Collision handling: cuboids use a z-rotated OBB test (2D separating axes in
the xy plane times z-interval overlap), spheres are exact, cylinders collide
via their bounding box. Voxelization elsewhere stays exact for cylinders.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from shapely.geometry import Point, Polygon
from shapely.ops import unary_union

from .errors import DataError
from .geom import GridSpec, ObjectInstance, Scene, pairwise_view, sample_object

SWEEP_STEP = 0.005
SUPPORT_EPS_Z = 0.002
BLOCK_OPPOSE_COS = -0.5  # contact normal vs motion below -cos(60 deg) stops motion
YAW_PER_OFFSET = 0.5     # rad per meter of contact-centroid lever arm
YAW_CLIP = 0.15
FIXED_MAG_RANGE = (0.05, 0.20)


def _axis_directions():
    axes = [(1.0, 0.0, 0.0), (-1.0, 0.0, 0.0), (0.0, 1.0, 0.0),
            (0.0, -1.0, 0.0), (0.0, 0.0, 1.0), (0.0, 0.0, -1.0)]
    s = 1.0 / math.sqrt(2.0)
    diag = []
    for i, j in ((0, 1), (0, 2), (1, 2)):
        for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
            v = [0.0, 0.0, 0.0]
            v[i], v[j] = si * s, sj * s
            diag.append(tuple(v))
    return tuple(axes) + tuple(diag)


ACTION_DIRECTIONS = _axis_directions()  # 6 axes + 12 in-plane diagonals


@dataclass(frozen=True)
class PerturbationAction:
    """A straight-line displacement command for the referrant object."""

    direction: tuple[float, float, float]
    magnitude: float
    kind: str  # "fixed" | "adaptive"

    def __post_init__(self):
        n = math.sqrt(sum(c * c for c in self.direction))
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"direction must be unit length, got norm {n}")
        if self.kind not in ("fixed", "adaptive"):
            raise ValueError(f"unknown action kind {self.kind!r}")
        if self.kind == "fixed" and not (FIXED_MAG_RANGE[0] <= self.magnitude <= FIXED_MAG_RANGE[1]):
            raise ValueError(f"fixed magnitude outside {FIXED_MAG_RANGE}: {self.magnitude}")
        if self.magnitude < 0:
            raise ValueError("magnitude must be non-negative")


@dataclass(frozen=True)
class Contact:
    point: tuple[float, float, float]   # anchor frame
    normal: tuple[float, float, float]  # anchor frame, pushes the referrant away


@dataclass(frozen=True)
class InteractionEffect:
    delta_p: float                            # |final - initial| referrant center, m
    displacement: tuple[float, float, float]  # final - initial, m
    delta_theta: tuple[float, float, float]   # (roll, pitch, yaw) deltas, rad
    contacts: tuple[Contact, ...]
    blocked: bool


class InteractionRecord:
    """One pair scene: sampled geometry, its 36 actions and their effects."""

    def __init__(self, scene_id: int, anchor: ObjectInstance,
                 referrant: ObjectInstance, actions, effects, grid: GridSpec):
        if len(actions) != len(effects):
            raise ValueError("actions and effects must align")
        self.scene_id = scene_id
        self.anchor = anchor
        self.referrant = referrant
        self.actions = tuple(actions)
        self.effects = tuple(effects)
        self.grid = grid
        self._pair_view = None

    @property
    def pair_view(self):
        if self._pair_view is None:
            scene = Scene((self.anchor, self.referrant))
            self._pair_view = pairwise_view(scene, 0, 1, self.grid)
        return self._pair_view


# --- collision primitives ---------------------------------------------------

class _Body:
    """Shape data prepared for repeated collision tests at moving centers."""

    __slots__ = ("kind", "r", "hw", "hd", "hh", "cos", "sin")

    def __init__(self, obj: ObjectInstance):
        if obj.shape == "sphere":
            self.kind = "sphere"
            self.r = obj.dims[0]
            self.hw = self.hd = self.hh = self.r
            self.cos, self.sin = 1.0, 0.0
        else:
            self.kind = "box"
            if obj.shape == "cylinder":
                self.hw = self.hd = obj.dims[0]
                self.hh = 0.5 * obj.dims[2]
            else:
                self.hw, self.hd = 0.5 * obj.dims[0], 0.5 * obj.dims[1]
                self.hh = 0.5 * obj.dims[2]
            self.r = math.sqrt(self.hw ** 2 + self.hd ** 2 + self.hh ** 2)
            self.cos, self.sin = math.cos(obj.yaw), math.sin(obj.yaw)


def _box_axes(body: _Body):
    return ((body.cos, body.sin), (-body.sin, body.cos))


def _box_proj_radius(body: _Body, ux: float, uy: float) -> float:
    e1x, e1y = body.cos, body.sin
    e2x, e2y = -body.sin, body.cos
    return body.hw * abs(ux * e1x + uy * e1y) + body.hd * abs(ux * e2x + uy * e2y)


def _overlap_depths(a: _Body, ac, b: _Body, bc):
    """Per-axis overlap depths for two boxes; any value <= 0 means separated.

    Returns (z_depth, [(depth, ux, uy), ...]) over the four footprint normals.
    """
    zd = min(ac[2] + a.hh, bc[2] + b.hh) - max(ac[2] - a.hh, bc[2] - b.hh)
    dx, dy = bc[0] - ac[0], bc[1] - ac[1]
    xy = []
    for ux, uy in _box_axes(a) + _box_axes(b):
        sep = abs(dx * ux + dy * uy)
        depth = _box_proj_radius(a, ux, uy) + _box_proj_radius(b, ux, uy) - sep
        xy.append((depth, ux, uy))
    return zd, xy


def _penetration(a: _Body, ac, b: _Body, bc) -> float:
    """Minimum translation depth; 0.0 when the shapes do not overlap."""
    if a.kind == "sphere" and b.kind == "sphere":
        d = math.dist(ac, bc)
        return max(0.0, a.r + b.r - d)
    if a.kind == "sphere" or b.kind == "sphere":
        if a.kind == "sphere":
            sph_c, sph_r, box, box_c = ac, a.r, b, bc
        else:
            sph_c, sph_r, box, box_c = bc, b.r, a, ac
        px, py, pz = _closest_point_on_box(box, box_c, sph_c)
        d = math.dist(sph_c, (px, py, pz))
        return max(0.0, sph_r - d)
    zd, xy = _overlap_depths(a, ac, b, bc)
    if zd <= 0:
        return 0.0
    depth = zd
    for dv, _, _ in xy:
        if dv <= 0:
            return 0.0
        depth = min(depth, dv)
    return depth


def _closest_point_on_box(box: _Body, bc, p):
    lx = p[0] - bc[0]
    ly = p[1] - bc[1]
    # into the box frame
    bx = box.cos * lx + box.sin * ly
    by = -box.sin * lx + box.cos * ly
    bz = p[2] - bc[2]
    cx = min(max(bx, -box.hw), box.hw)
    cy = min(max(by, -box.hd), box.hd)
    cz = min(max(bz, -box.hh), box.hh)
    wx = box.cos * cx - box.sin * cy + bc[0]
    wy = box.sin * cx + box.cos * cy + bc[1]
    return wx, wy, cz + bc[2]


def _collides(a: _Body, ac, b: _Body, bc) -> bool:
    return _penetration(a, ac, b, bc) > 0.0


def collides(a: ObjectInstance, b: ObjectInstance) -> bool:
    """Strict overlap test; touching surfaces do not count as collision."""
    return _collides(_Body(a), a.position, _Body(b), b.position)


def penetration_depth(a: ObjectInstance, b: ObjectInstance) -> float:
    return _penetration(_Body(a), a.position, _Body(b), b.position)


def _footprint_polygon_at(body: _Body, cx: float, cy: float) -> Polygon:
    pts = []
    for sx, sy in ((-1, -1), (1, -1), (1, 1), (-1, 1)):
        x, y = sx * body.hw, sy * body.hd
        pts.append((cx + body.cos * x - body.sin * y,
                    cy + body.sin * x + body.cos * y))
    return Polygon(pts)


def _contact_patch(a: _Body, ac, b: _Body, bc):
    """Contact points, centroid and normal for an overlapping pose.

    The normal is oriented from the anchor (a) toward the referrant (b). For
    box pairs the patch is the centroid plus the vertices of the footprint
    intersection, placed at the contact plane; the normal comes from the
    minimum-penetration face.
    """
    if a.kind == "sphere" or b.kind == "sphere":
        if a.kind == "sphere" and b.kind == "sphere":
            d = np.subtract(bc, ac)
            n = d / (np.linalg.norm(d) or 1.0)
            pt = np.add(ac, n * a.r)
        elif a.kind == "sphere":
            pt = np.asarray(_closest_point_on_box(b, bc, ac))
            d = pt - np.asarray(ac)
            nn = np.linalg.norm(d)
            n = d / nn if nn > 1e-12 else np.array([0.0, 0.0, 1.0])
        else:
            pt = np.asarray(_closest_point_on_box(a, ac, bc))
            d = np.subtract(bc, pt)
            nn = np.linalg.norm(d)
            n = d / nn if nn > 1e-12 else np.array([0.0, 0.0, 1.0])
        pt = np.asarray(pt, dtype=np.float64)
        return pt[None, :], pt, np.asarray(n, dtype=np.float64)

    zd, xy = _overlap_depths(a, ac, b, bc)
    min_xy = min(xy, key=lambda t: t[0])
    if zd <= min_xy[0]:
        sign = 1.0 if bc[2] >= ac[2] else -1.0
        normal = np.array([0.0, 0.0, sign])
        z_plane = ac[2] + sign * a.hh
    else:
        ux, uy = min_xy[1], min_xy[2]
        s = (bc[0] - ac[0]) * ux + (bc[1] - ac[1]) * uy
        sign = 1.0 if s >= 0 else -1.0
        normal = np.array([sign * ux, sign * uy, 0.0])
        z_plane = 0.5 * (max(ac[2] - a.hh, bc[2] - b.hh) + min(ac[2] + a.hh, bc[2] + b.hh))
    poly = _footprint_polygon_at(a, ac[0], ac[1]).intersection(
        _footprint_polygon_at(b, bc[0], bc[1]))
    if poly.is_empty or poly.area == 0.0:
        cx = 0.5 * (ac[0] + bc[0])
        cy = 0.5 * (ac[1] + bc[1])
        centroid = np.array([cx, cy, z_plane])
        return centroid[None, :], centroid, normal
    verts = np.asarray(poly.exterior.coords)[:-1]
    centroid = np.array([poly.centroid.x, poly.centroid.y, z_plane])
    pts = np.concatenate([centroid[None, :],
                          np.column_stack([verts, np.full(len(verts), z_plane)])])
    return pts[:8 + 1], centroid, normal


def _to_anchor_frame(anchor: ObjectInstance, vecs: np.ndarray,
                     translate: bool) -> np.ndarray:
    out = np.asarray(vecs, dtype=np.float64).copy()
    if translate:
        out = out - anchor.center
    c, s = math.cos(anchor.yaw), math.sin(anchor.yaw)
    x = c * out[..., 0] + s * out[..., 1]
    y = -s * out[..., 0] + c * out[..., 1]
    out[..., 0], out[..., 1] = x, y
    return out


def _sphere_entry_t(center, p0, d, radius, tmax):
    """Smallest sweep parameter at which |p0 + t d - center| <= radius, else None."""
    mx, my, mz = p0[0] - center[0], p0[1] - center[1], p0[2] - center[2]
    b = mx * d[0] + my * d[1] + mz * d[2]
    c = mx * mx + my * my + mz * mz - radius * radius
    if c <= 0.0:
        return 0.0
    disc = b * b - c
    if disc < 0.0:
        return None
    t = -b - math.sqrt(disc)
    if t < 0.0 or t > tmax:
        return None
    return t


def apply_perturbation(anchor: ObjectInstance, referrant: ObjectInstance,
                       action: PerturbationAction,
                       step: float = SWEEP_STEP) -> InteractionEffect:
    """Sweep the referrant along the action until the budget is spent or a
    contact stops it.

    A contact whose normal opposes the motion (normal . direction < -cos 60)
    blocks it; otherwise the remaining displacement is projected once onto the
    contact tangent plane and the sweep continues. Any contact after that
    projection stops the motion. The yaw effect is kappa times the signed
    lever arm of the first contact centroid about the motion line through the
    referrant center, clipped to +-0.15 rad.
    """
    if action.magnitude <= 0.0:
        raise ValueError("degenerate zero-magnitude action")
    a_body, r_body = _Body(anchor), _Body(referrant)
    # All sweep math runs relative to the anchor center so that rigidly
    # translated scenes produce identical effects.
    ac = (0.0, 0.0, 0.0)
    start = np.asarray(referrant.position, dtype=np.float64) - anchor.center
    if _penetration(a_body, ac, r_body, start) > 1e-6:
        raise ValueError("initial interpenetration exceeds tolerance")
    pos = start.copy()
    d = np.asarray(action.direction, dtype=np.float64)
    remaining = float(action.magnitude)
    reach = a_body.r + r_body.r
    contacts_world = []   # (point, normal) pairs
    first_event = None    # (centroid, direction, referrant center at event)
    projected = False
    blocked = False
    while remaining > 1e-12:
        t_entry = _sphere_entry_t(ac, pos, d, reach, remaining)
        if t_entry is None:
            pos = pos + d * remaining
            remaining = 0.0
            break
        skip = t_entry - step
        if skip > 0.0:
            pos = pos + d * skip
            remaining -= skip
        dstep = min(step, remaining)
        cand = pos + d * dstep
        if not _collides(a_body, ac, r_body, cand):
            pos = cand
            remaining -= dstep
            continue
        pts, centroid, normal = _contact_patch(a_body, ac, r_body, cand)
        for p in pts:
            contacts_world.append((p, normal))
        if first_event is None:
            first_event = (centroid, d.copy(), pos.copy())
        ndotd = float(normal @ d)
        if projected or ndotd < BLOCK_OPPOSE_COS:
            blocked = True
            break
        rem_vec = d * remaining - (ndotd * remaining) * normal
        rem_len = float(np.linalg.norm(rem_vec))
        if rem_len < 1e-9:
            blocked = True
            break
        d = rem_vec / rem_len
        remaining = rem_len
        projected = True

    displacement = pos - start
    delta_p = float(np.linalg.norm(displacement))
    if delta_p > action.magnitude + 1e-9:
        raise AssertionError("sweep exceeded commanded magnitude")
    if _penetration(a_body, ac, r_body, pos) > 1e-6:
        raise AssertionError("sweep left referrant interpenetrating")
    dtheta_z = 0.0
    if first_event is not None:
        centroid, d_ev, com = first_event
        r = centroid - com
        lever = d_ev[0] * r[1] - d_ev[1] * r[0]
        dtheta_z = float(np.clip(YAW_PER_OFFSET * lever, -YAW_CLIP, YAW_CLIP))
    # Points are already anchor-relative; only the yaw rotation remains.
    contact_objs = tuple(
        Contact(tuple(_to_anchor_frame(anchor, p, translate=False)),
                tuple(_to_anchor_frame(anchor, n, translate=False)))
        for p, n in contacts_world)
    return InteractionEffect(delta_p=delta_p,
                             displacement=tuple(displacement),
                             delta_theta=(0.0, 0.0, dtheta_z),
                             contacts=contact_objs,
                             blocked=blocked)


# --- pair scene sampling -----------------------------------------------------

def sample_pair_scene(rng_seed, max_center_distance: float = 0.5,
                      dim_range: tuple[float, float] = (0.04, 0.20),
                      max_tries: int = 100):
    """Sample an anchor at the origin, a non-overlapping referrant within
    ``max_center_distance``, and the 36-action set (18 directions, each once
    fixed and once adaptive). Fully determined by the seed."""
    rng = np.random.default_rng(rng_seed)
    anchor = sample_object(rng, dim_range, position=(0.0, 0.0, 0.0), yaw=0.0)
    referrant = None
    for _ in range(max_tries):
        u = rng.normal(size=3)
        norm = np.linalg.norm(u)
        if norm < 1e-12:
            continue
        radius = rng.uniform(0.0, max_center_distance)
        pos = tuple(u / norm * radius)
        yaw = float(rng.uniform(-math.pi / 6, math.pi / 6))
        cand = sample_object(rng, dim_range, position=pos, yaw=yaw)
        if not collides(anchor, cand):
            referrant = cand
            break
    if referrant is None:
        raise DataError("could not place referrant without overlap")
    dist = float(np.linalg.norm(referrant.center - anchor.center))
    actions = []
    for direction in ACTION_DIRECTIONS:
        fixed_mag = float(rng.uniform(*FIXED_MAG_RANGE))
        actions.append(PerturbationAction(direction, fixed_mag, "fixed"))
        actions.append(PerturbationAction(direction, dist, "adaptive"))
    return anchor, referrant, tuple(actions)


def simulate_pair_scene(scene_id: int, rng_seed, grid: GridSpec,
                        max_center_distance: float = 0.5) -> InteractionRecord:
    """Sample one pair scene and run every action from the pristine pose."""
    anchor, referrant, actions = sample_pair_scene(
        rng_seed, max_center_distance=max_center_distance)
    effects = tuple(apply_perturbation(anchor, referrant, a) for a in actions)
    return InteractionRecord(scene_id, anchor, referrant, actions, effects, grid)


# --- stability and task oracles ----------------------------------------------

def stability_check(blocks, move_threshold: float = 0.0015,
                    check_interpenetration: bool = True):
    """Iterative support-polygon stability for z-rotated rectangular prisms.

    A block is supported when the xy projection of its center of mass lies
    inside the convex hull of the union of its footprint overlaps with current
    supporters (the floor counts). Unsupported blocks fall and the check
    repeats. ``move_threshold`` is kept for interface parity with a dynamic
    displacement check; the quasi-static criterion decides by support.
    """
    blocks = list(blocks)
    for b in blocks:
        if b.shape != "cuboid":
            raise ValueError("blocks must be rectangular prisms")
    if check_interpenetration:
        for i in range(len(blocks)):
            for j in range(i + 1, len(blocks)):
                if penetration_depth(blocks[i], blocks[j]) > 1e-4:
                    raise ValueError("invalid stack")
    polys = [Polygon(b.footprint_corners()) for b in blocks]
    bottoms = [b.z_interval()[0] for b in blocks]
    tops = [b.z_interval()[1] for b in blocks]
    alive = set(range(len(blocks)))
    fallen: set[int] = set()
    for _ in range(len(blocks) + 1):
        drop = []
        for b in sorted(alive):
            if bottoms[b] <= SUPPORT_EPS_Z:
                continue  # resting on the floor; COM projects into own footprint
            overlaps = []
            for s in sorted(alive - {b}):
                if abs(tops[s] - bottoms[b]) <= SUPPORT_EPS_Z:
                    inter = polys[s].intersection(polys[b])
                    if not inter.is_empty and inter.area > 0.0:
                        overlaps.append(inter)
            ok = False
            if overlaps:
                hull = unary_union(overlaps).convex_hull
                ok = hull.covers(Point(blocks[b].position[0], blocks[b].position[1]))
            if not ok:
                drop.append(b)
        if not drop:
            break
        alive.difference_update(drop)
        fallen.update(drop)
    return len(fallen) == 0, frozenset(fallen)


def sweep_line_oracle(objects, half_width: float = 0.075) -> bool:
    """True iff every object's y center is within ``half_width`` of the median
    y center (closed interval)."""
    objects = list(objects)
    if len(objects) < 2:
        raise ValueError("need at least 2 objects")
    ys = np.array([o.position[1] for o in objects])
    med = float(np.median(ys))
    return bool(np.all(np.abs(ys - med) <= half_width))


# --- geometry import path (Real2Sim) -----------------------------------------

def reconstruct_boxes(scene: Scene, voxel_size: float):
    """Fit an axis-aligned box to each object's voxel mask on a shared grid."""
    from .geom import scene_grid, voxelize

    spec = scene_grid(scene, voxel_size)
    grid = voxelize(scene.objects, spec)
    boxes = []
    for c in range(len(scene.objects)):
        if grid.object_outside[c]:
            raise DataError(f"object {c} lost in voxel reconstruction")
        lo, hi = grid.channel_bounds_world(c)
        dims = tuple(float(max(d, 0.001)) for d in hi - lo)
        center = tuple(float(x) for x in 0.5 * (lo + hi))
        boxes.append(ObjectInstance("cuboid", dims, center, 0.0))
    return boxes


def settle_boxes(boxes):
    """Drop each box onto the floor or the highest xy-overlapping box below
    its center, in ascending original-bottom order.

    Returns (settled boxes in input order, per-box |z displacement|).
    """
    boxes = list(boxes)
    order = sorted(range(len(boxes)), key=lambda i: (boxes[i].z_interval()[0], i))
    polys = [Polygon(b.footprint_corners()) for b in boxes]
    settled: dict[int, ObjectInstance] = {}
    disps = [0.0] * len(boxes)
    for i in order:
        b = boxes[i]
        rest = 0.0
        for j, s in settled.items():
            top = s.z_interval()[1]
            if top <= b.position[2] + 1e-9:
                inter = polys[j].intersection(polys[i])
                if not inter.is_empty and inter.area > 0.0:
                    rest = max(rest, top)
        h = b.dims[2]
        new_center_z = rest + 0.5 * h
        disps[i] = abs(new_center_z - b.position[2])
        settled[i] = ObjectInstance(b.shape, b.dims,
                                    (b.position[0], b.position[1], new_center_z),
                                    b.yaw)
    return [settled[i] for i in range(len(boxes))], disps


def real2sim_predict(task: str, reconstruction, *, removal_target: int | None = None,
                     half_width: float = 0.075, move_threshold: float = 0.0015,
                     sweep_margin: float = 0.02) -> bool:
    """Predict a task precondition by importing (possibly voxel-derived)
    geometry and running the corresponding oracle.

    unstack: remove the designated block, seat the remaining boxes, and call
    the stack stable iff nothing moved beyond ``move_threshold`` and the
    support check passes. sweep: place the virtual bar at the scene's minimum
    corner x minus ``sweep_margin`` and apply the one-side line criterion.
    """
    reconstruction = list(reconstruction)
    if not reconstruction:
        raise ValueError("empty reconstruction")
    if task == "unstack":
        if removal_target is None or not (0 <= removal_target < len(reconstruction)):
            raise ValueError("removal target required for unstacking")
        remaining = [o for i, o in enumerate(reconstruction) if i != removal_target]
        if not remaining:
            return True
        settled, disps = settle_boxes(remaining)
        if max(disps) > move_threshold:
            return False
        stable, _ = stability_check(settled, move_threshold,
                                    check_interpenetration=False)
        return stable
    if task == "sweep":
        lo = min(o.world_aabb()[0][0] for o in reconstruction)
        _ = lo - sweep_margin  # bar start pose; the decision is the line criterion
        return sweep_line_oracle(reconstruction, half_width)
    raise ValueError(f"unknown task {task!r}")

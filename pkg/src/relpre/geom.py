"""Shape primitives, voxel occupancy grids, anchor-centric pairwise views and
the 26-region spatial partition used by the discrete-relation baseline."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

SHAPES = ("cuboid", "cylinder", "sphere")

DIM_MIN = 0.001
DIM_MAX = 1.0


@dataclass(frozen=True)
class ObjectInstance:
    """A primitive shape with a pose. Rotation is about the z axis only.

    ``dims`` semantics: cuboid = (width, depth, height); cylinder =
    (radius, radius, height); sphere uses dims[0] as the radius.
    """

    shape: str
    dims: tuple[float, float, float]
    position: tuple[float, float, float]
    yaw: float = 0.0

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}")
        if len(self.dims) != 3 or any(not (DIM_MIN <= d <= DIM_MAX) for d in self.dims):
            raise ValueError(f"dims out of range [{DIM_MIN}, {DIM_MAX}]: {self.dims}")
        if self.shape == "cylinder" and self.dims[0] != self.dims[1]:
            raise ValueError("cylinder dims must be (radius, radius, height)")
        if not (-math.pi <= self.yaw <= math.pi):
            raise ValueError(f"yaw outside [-pi, pi]: {self.yaw}")

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.position, dtype=np.float64)

    def translated(self, delta) -> "ObjectInstance":
        p = self.center + np.asarray(delta, dtype=np.float64)
        return replace(self, position=(float(p[0]), float(p[1]), float(p[2])))

    def bounding_radius(self) -> float:
        if self.shape == "sphere":
            return self.dims[0]
        w, d, h = self.dims
        if self.shape == "cylinder":
            w = d = 2.0 * self.dims[0]
            h = self.dims[2]
        return 0.5 * math.sqrt(w * w + d * d + h * h)

    def footprint_corners(self) -> np.ndarray:
        """xy corners of the (rotated) footprint rectangle, shape (4, 2).

        For cylinders and spheres this is the footprint of the bounding box.
        """
        if self.shape == "sphere":
            hw = hd = self.dims[0]
        elif self.shape == "cylinder":
            hw = hd = self.dims[0]
        else:
            hw, hd = 0.5 * self.dims[0], 0.5 * self.dims[1]
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        cx, cy = self.position[0], self.position[1]
        corners = []
        for sx, sy in ((-1, -1), (1, -1), (1, 1), (-1, 1)):
            x, y = sx * hw, sy * hd
            corners.append((cx + c * x - s * y, cy + s * x + c * y))
        return np.asarray(corners, dtype=np.float64)

    def z_interval(self) -> tuple[float, float]:
        if self.shape == "sphere":
            h = 2.0 * self.dims[0]
        else:
            h = self.dims[2]
        z = self.position[2]
        return (z - 0.5 * h, z + 0.5 * h)

    def world_aabb(self) -> tuple[np.ndarray, np.ndarray]:
        corners = self.footprint_corners()
        z0, z1 = self.z_interval()
        lo = np.array([corners[:, 0].min(), corners[:, 1].min(), z0])
        hi = np.array([corners[:, 0].max(), corners[:, 1].max(), z1])
        return lo, hi

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean mask of points inside the primitive; boundary counts as inside."""
        pts = np.asarray(points, dtype=np.float64) - self.center
        if self.shape == "sphere":
            return np.einsum("ij,ij->i", pts, pts) <= self.dims[0] ** 2
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        x = c * pts[:, 0] + s * pts[:, 1]
        y = -s * pts[:, 0] + c * pts[:, 1]
        z = pts[:, 2]
        if self.shape == "cylinder":
            r, _, h = self.dims
            return (x * x + y * y <= r * r) & (np.abs(z) <= 0.5 * h)
        w, d, h = self.dims
        return (np.abs(x) <= 0.5 * w) & (np.abs(y) <= 0.5 * d) & (np.abs(z) <= 0.5 * h)


@dataclass(frozen=True)
class Scene:
    """An ordered collection of objects; object ids are list indices."""

    objects: tuple[ObjectInstance, ...]
    scene_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))

    def __len__(self) -> int:
        return len(self.objects)

    def translated(self, delta) -> "Scene":
        return Scene(tuple(o.translated(delta) for o in self.objects), self.scene_id)


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned voxel lattice: per-axis cell counts, cell size, and the world
    coordinate of the (0, 0, 0) cell corner."""

    resolution: tuple[int, int, int]
    voxel_size: float
    origin: tuple[float, float, float] | None = None

    def __post_init__(self):
        if self.voxel_size <= 0:
            raise ValueError("voxel_size must be positive")
        if len(self.resolution) != 3 or any(r < 1 for r in self.resolution):
            raise ValueError(f"bad resolution {self.resolution}")

    @property
    def half_extent(self) -> np.ndarray:
        return 0.5 * self.voxel_size * np.asarray(self.resolution, dtype=np.float64)

    def with_origin(self, origin) -> "GridSpec":
        o = tuple(float(v) for v in origin)
        return GridSpec(self.resolution, self.voxel_size, o)

    def cell_centers_1d(self, axis: int) -> np.ndarray:
        if self.origin is None:
            raise ValueError("grid has no origin")
        n = self.resolution[axis]
        return self.origin[axis] + (np.arange(n) + 0.5) * self.voxel_size


@dataclass
class VoxelGrid:
    """C binary occupancy channels over one grid. ``object_outside[c]`` flags
    channels whose source object produced no occupied cell."""

    resolution: tuple[int, int, int]
    voxel_size: float
    origin: tuple[float, float, float]
    channels: np.ndarray  # bool, shape (C, L, W, H)
    object_outside: tuple[bool, ...] = ()

    @property
    def num_channels(self) -> int:
        return self.channels.shape[0]

    def occupied_count(self, channel: int) -> int:
        return int(self.channels[channel].sum())

    def occupied_indices(self, channel: int) -> np.ndarray:
        return np.argwhere(self.channels[channel])

    def channel_centroid_world(self, channel: int) -> np.ndarray:
        """World-space centroid of a channel's occupied cell centers."""
        idx = self.occupied_indices(channel)
        if idx.shape[0] == 0:
            raise ValueError("empty channel")
        mean_idx = idx.mean(axis=0)
        return np.asarray(self.origin) + (mean_idx + 0.5) * self.voxel_size

    def channel_bounds_cells(self, channel: int) -> tuple[np.ndarray, np.ndarray]:
        idx = self.occupied_indices(channel)
        if idx.shape[0] == 0:
            raise ValueError("empty channel")
        return idx.min(axis=0), idx.max(axis=0)

    def channel_bounds_world(self, channel: int) -> tuple[np.ndarray, np.ndarray]:
        """World AABB of the occupied cells (cell boundaries, not centers)."""
        lo, hi = self.channel_bounds_cells(channel)
        origin = np.asarray(self.origin)
        return origin + lo * self.voxel_size, origin + (hi + 1) * self.voxel_size


@dataclass
class VoxelPairInput:
    """Anchor-centric 3-channel view of an object pair.

    Channel 0 is the union mask, channel 1 the anchor, channel 2 the referrant.
    The anchor's center sits at the center of cell (L//2, W//2, H//2).
    """

    grid: VoxelGrid
    anchor_id: int
    referrant_id: int
    clip: bool = False

    def as_array(self, dtype=np.float32) -> np.ndarray:
        return self.grid.channels.astype(dtype)


def voxelize(objects, grid_spec: GridSpec) -> VoxelGrid:
    """Rasterize objects into one occupancy channel each.

    A cell is occupied iff its center lies inside the primitive (boundary
    inclusive). Objects with no occupied cell get an empty mask and a raised
    ``object_outside`` flag rather than an error.
    """
    objects = list(objects)
    if not objects:
        raise ValueError("objects must be non-empty")
    if grid_spec.origin is None:
        raise ValueError("grid_spec must carry an origin")
    res = grid_spec.resolution
    v = grid_spec.voxel_size
    origin = np.asarray(grid_spec.origin, dtype=np.float64)
    channels = np.zeros((len(objects),) + tuple(res), dtype=bool)
    outside = []
    xs = grid_spec.cell_centers_1d(0)
    ys = grid_spec.cell_centers_1d(1)
    zs = grid_spec.cell_centers_1d(2)
    for ci, obj in enumerate(objects):
        lo, hi = obj.world_aabb()
        # Restrict the containment test to the object's AABB cell range.
        i0 = np.maximum(np.floor((lo - origin) / v).astype(int) - 1, 0)
        i1 = np.minimum(np.ceil((hi - origin) / v).astype(int) + 1,
                        np.asarray(res))
        if np.any(i0 >= i1):
            outside.append(True)
            continue
        gx, gy, gz = np.meshgrid(xs[i0[0]:i1[0]], ys[i0[1]:i1[1]], zs[i0[2]:i1[2]],
                                 indexing="ij")
        pts = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
        mask = obj.contains(pts).reshape(gx.shape)
        channels[ci, i0[0]:i1[0], i0[1]:i1[1], i0[2]:i1[2]] = mask
        outside.append(not mask.any())
    return VoxelGrid(tuple(res), v, tuple(grid_spec.origin), channels, tuple(outside))


def pairwise_view(scene: Scene, anchor_id: int, referrant_id: int,
                  grid_spec: GridSpec) -> VoxelPairInput:
    """Anchor-centric 3-channel voxel view of an ordered object pair.

    The scene is translated so the anchor center maps to the center of the
    grid's central cell. The clip flag is set when the referrant center is
    farther than the grid half-extent on any axis, or when its mask is empty.
    """
    n = len(scene)
    if anchor_id == referrant_id:
        raise ValueError("anchor and referrant must differ")
    if not (0 <= anchor_id < n and 0 <= referrant_id < n):
        raise ValueError(f"object id out of range for scene of {n} objects")
    anchor = scene.objects[anchor_id]
    referrant = scene.objects[referrant_id]
    res = np.asarray(grid_spec.resolution)
    v = grid_spec.voxel_size
    # Anchor center lands on the center of cell res//2.
    origin = anchor.center - (res // 2 + 0.5) * v
    spec = grid_spec.with_origin(origin)
    grid = voxelize([anchor, referrant], spec)
    union = grid.channels[0] | grid.channels[1]
    channels = np.stack([union, grid.channels[0], grid.channels[1]])
    offset = np.abs(referrant.center - anchor.center)
    clip = bool(np.any(offset > spec.half_extent)) or grid.object_outside[1]
    out = VoxelGrid(grid.resolution, v, grid.origin, channels,
                    (False,) + grid.object_outside)
    return VoxelPairInput(out, anchor_id, referrant_id, clip)


def center_cell(resolution) -> tuple[int, int, int]:
    return tuple(int(r) // 2 for r in resolution)


# Lexicographic enumeration of the 26 regions around an axis-aligned bound:
# (dx, dy, dz) over {-1, 0, +1}^3 with (0, 0, 0) removed. The flat code
# (dx+1)*9 + (dy+1)*3 + (dz+1) is already in lexicographic order, so region
# index = code for code < 13 and code - 1 above.
REGION_OFFSETS = tuple(
    (dx, dy, dz)
    for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1)
    if (dx, dy, dz) != (0, 0, 0)
)


def region_of_offsets(dx: int, dy: int, dz: int) -> int:
    """Region index of a (dx, dy, dz) offset triple in {-1, 0, +1}."""
    code = (dx + 1) * 9 + (dy + 1) * 3 + (dz + 1)
    if code == 13:
        raise ValueError("(0, 0, 0) is not a region")
    return code if code < 13 else code - 1


def region_index(anchor: ObjectInstance, referrant_voxels: VoxelGrid,
                 channel: int = 0) -> int:
    """Index in [0, 25] of the region around the anchor's voxel bound holding
    the most referrant voxels; ties resolve to the lowest index.

    Referrant voxels falling inside the anchor bound on all three axes belong
    to the excluded middle region and are not counted.
    """
    spec = GridSpec(referrant_voxels.resolution, referrant_voxels.voxel_size,
                    referrant_voxels.origin)
    anchor_grid = voxelize([anchor], spec)
    if anchor_grid.object_outside[0]:
        raise ValueError("empty anchor")
    lo, hi = anchor_grid.channel_bounds_cells(0)
    ref_idx = referrant_voxels.occupied_indices(channel)
    if ref_idx.shape[0] == 0:
        raise ValueError("empty referrant")
    offs = np.zeros_like(ref_idx)
    offs[ref_idx < lo] = -1
    offs[ref_idx > hi] = 1
    codes = (offs[:, 0] + 1) * 9 + (offs[:, 1] + 1) * 3 + (offs[:, 2] + 1)
    counts = np.bincount(codes[codes != 13], minlength=27)
    counts = np.concatenate([counts[:13], counts[14:]])
    return int(np.argmax(counts))


def voxel_center_distance(grid_a: VoxelGrid, channel_a: int,
                          grid_b: VoxelGrid | None = None,
                          channel_b: int = 0) -> float:
    """Euclidean distance in meters between two channels' occupied centroids."""
    if grid_b is None:
        grid_b = grid_a
    ca = grid_a.channel_centroid_world(channel_a)
    cb = grid_b.channel_centroid_world(channel_b)
    return float(np.linalg.norm(ca - cb))


def scene_grid(scene: Scene, voxel_size: float, margin_cells: int = 1) -> GridSpec:
    """Grid spec covering a whole scene with a margin, anchored to the scene's
    minimum corner so translated scenes voxelize identically."""
    los, his = zip(*(o.world_aabb() for o in scene.objects))
    lo = np.min(los, axis=0) - margin_cells * voxel_size
    hi = np.max(his, axis=0) + margin_cells * voxel_size
    res = tuple(int(n) for n in np.ceil((hi - lo) / voxel_size + 0.5))
    return GridSpec(res, voxel_size, tuple(float(x) for x in lo))


def sample_object(rng, dim_range: tuple[float, float] = (0.04, 0.20),
                  position=(0.0, 0.0, 0.0), yaw: float = 0.0) -> ObjectInstance:
    """Sample a primitive whose physical extents are drawn uniformly from
    ``dim_range``; radii are stored as half the sampled diameter."""
    shape = SHAPES[int(rng.integers(len(SHAPES)))]
    lo, hi = dim_range
    if shape == "sphere":
        r = 0.5 * float(rng.uniform(lo, hi))
        dims = (r, r, r)
    elif shape == "cylinder":
        r = 0.5 * float(rng.uniform(lo, hi))
        dims = (r, r, float(rng.uniform(lo, hi)))
    else:
        dims = tuple(float(v) for v in rng.uniform(lo, hi, 3))
    return ObjectInstance(shape, dims, tuple(float(p) for p in position), yaw)


def desk_grid() -> GridSpec:
    """Default working-scale pairwise grid: 32^3 cells at 0.02 m."""
    return GridSpec((32, 32, 32), 0.02)


def paper_grid() -> GridSpec:
    """Full-scale pairwise grid: 100^3 cells at 0.01 m."""
    return GridSpec((100, 100, 100), 0.01)

"""Spherical geometry and hierarchical triangular mesh indexing.

Pure functions over unit vectors: coordinate conversions, arc angles,
trixel lookup, and sky-region covers.  Angles cross the API in degrees;
trixel IDs are plain ints whose bit length (4 + 2*depth) encodes their
depth, with the top four bits naming one of the eight octahedron faces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidPolygonError, MalformedIDError

MAX_DEPTH = 20

# A point within this slack of an edge plane still counts as inside, so
# descent cannot fall through a numerical crack between sibling trixels.
EDGE_EPSILON = 1e-12

# Padding (radians) applied to cover classification so rounding can only
# grow the cover, never drop an intersecting trixel.
_PAD = 1e-9

_CORNERS = np.array(
    [
        [0.0, 0.0, 1.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, -1.0],
    ]
)

# Face id -> octahedron corner indices; ids 8..11 are the southern faces,
# 12..15 the northern ones.
_FACE_CORNERS = (
    (1, 5, 2),
    (2, 5, 3),
    (3, 5, 4),
    (4, 5, 1),
    (1, 0, 4),
    (4, 0, 3),
    (3, 0, 2),
    (2, 0, 1),
)
FIRST_FACE_ID = 8

# (8, 3, 3) array: vertices of face id 8+i.
_FACE_VERTS = np.stack([_CORNERS[list(c)] for c in _FACE_CORNERS])


# ---------------------------------------------------------------------------
# vector helpers (row-wise over (n, 3) arrays)

def _norm_rows(v):
    n = np.sqrt(np.einsum("ij,ij->i", v, v))
    return v / n[:, None]


def _cross_rows(a, b):
    out = np.empty(np.broadcast(a, b).shape)
    out[:, 0] = a[:, 1] * b[:, 2] - a[:, 2] * b[:, 1]
    out[:, 1] = a[:, 2] * b[:, 0] - a[:, 0] * b[:, 2]
    out[:, 2] = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    return out


def _dot_rows(a, b):
    return np.einsum("ij,ij->i", a, b)


def _edge_side(a, b, p):
    """(a x b) . p for row arrays; >= -EDGE_EPSILON means p is on the
    inner side of the plane through a, b and the origin."""
    return (
        (a[:, 1] * b[:, 2] - a[:, 2] * b[:, 1]) * p[:, 0]
        + (a[:, 2] * b[:, 0] - a[:, 0] * b[:, 2]) * p[:, 1]
        + (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]) * p[:, 2]
    )


# ---------------------------------------------------------------------------
# coordinates and angles

def radec_to_unit(ra: float, dec: float) -> tuple[float, float, float]:
    """Unit vector for equatorial coordinates in degrees.

    ra is normalized modulo 360; dec must lie in [-90, +90].
    """
    if not -90.0 <= dec <= 90.0:
        raise DomainError("dec must be in [-90, 90], got %r" % (dec,))
    ra = float(ra) % 360.0
    rar = math.radians(ra)
    decr = math.radians(dec)
    cd = math.cos(decr)
    return (cd * math.cos(rar), cd * math.sin(rar), math.sin(decr))


def radec_to_unit_batch(ra, dec) -> np.ndarray:
    """Vectorized radec_to_unit; returns an (n, 3) array."""
    ra = np.asarray(ra, dtype=float) % 360.0
    dec = np.asarray(dec, dtype=float)
    rar = np.radians(ra)
    decr = np.radians(dec)
    cd = np.cos(decr)
    return np.stack([cd * np.cos(rar), cd * np.sin(rar), np.sin(decr)], axis=1)


def unit_to_radec(v) -> tuple[float, float]:
    """(ra, dec) in degrees for a unit vector; at the poles ra is 0."""
    x, y, z = float(v[0]), float(v[1]), float(v[2])
    d2 = x * x + y * y
    if d2 == 0.0:
        return (0.0, 90.0 if z > 0 else -90.0)
    ra = math.degrees(math.atan2(y, x)) % 360.0
    dec = math.degrees(math.atan2(z, math.sqrt(d2)))
    return (ra, dec)


def unit_to_radec_batch(v) -> tuple[np.ndarray, np.ndarray]:
    v = np.asarray(v, dtype=float)
    d = np.hypot(v[:, 0], v[:, 1])
    ra = np.where(d == 0.0, 0.0, np.degrees(np.arctan2(v[:, 1], v[:, 0]))) % 360.0
    dec = np.degrees(np.arctan2(v[:, 2], d))
    return ra, dec


def arc_angle(a, b) -> float:
    """Arc angle in degrees between two unit vectors.

    Uses the chord form 2*asin(|a-b|/2), which stays accurate for tiny
    separations where acos of the dot product loses precision.
    """
    dx = a[0] - b[0]
    dy = a[1] - b[1]
    dz = a[2] - b[2]
    half = 0.5 * math.sqrt(dx * dx + dy * dy + dz * dz)
    if half >= 1.0:
        return 180.0
    return math.degrees(2.0 * math.asin(half))


def arc_angle_batch(a, b) -> np.ndarray:
    """Row-wise arc angles in degrees between (n, 3) unit-vector arrays."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    half = 0.5 * np.sqrt(np.einsum("ij,ij->i", d, d))
    return np.degrees(2.0 * np.arcsin(np.minimum(half, 1.0)))


# ---------------------------------------------------------------------------
# trixel IDs

def trixel_depth(tid: int) -> int:
    """Subdivision depth encoded in a trixel ID; raises on bad bit patterns."""
    tid = int(tid)
    if tid < FIRST_FACE_ID:
        raise MalformedIDError("trixel id %d is below the face range" % tid)
    bits = tid.bit_length()
    if bits % 2 != 0:
        raise MalformedIDError("trixel id %d has an odd bit length" % tid)
    depth = (bits - 4) // 2
    if depth > MAX_DEPTH:
        raise MalformedIDError("trixel id %d is deeper than %d" % (tid, MAX_DEPTH))
    return depth


def trixel_range(tid: int, leaf_depth: int) -> tuple[int, int]:
    """Half-open [lo, hi) of leaf-depth IDs descending from tid."""
    depth = trixel_depth(tid)
    if not 0 <= leaf_depth <= MAX_DEPTH:
        raise DomainError("leaf depth must be in [0, %d]" % MAX_DEPTH)
    if depth > leaf_depth:
        raise DomainError(
            "trixel depth %d exceeds leaf depth %d" % (depth, leaf_depth)
        )
    shift = 2 * (leaf_depth - depth)
    return (tid << shift, (tid + 1) << shift)


def trixel_vertices(tid: int):
    """The three unit-vector corners of a trixel, as (3,) arrays."""
    depth = trixel_depth(tid)
    face = tid >> (2 * depth)
    v0, v1, v2 = (v.copy() for v in _FACE_VERTS[face - FIRST_FACE_ID])
    for level in range(depth - 1, -1, -1):
        child = (tid >> (2 * level)) & 3
        w0 = v1 + v2
        w0 /= np.linalg.norm(w0)
        w1 = v0 + v2
        w1 /= np.linalg.norm(w1)
        w2 = v0 + v1
        w2 /= np.linalg.norm(w2)
        if child == 0:
            v0, v1, v2 = v0, w2, w1
        elif child == 1:
            v0, v1, v2 = v1, w0, w2
        elif child == 2:
            v0, v1, v2 = v2, w1, w0
        else:
            v0, v1, v2 = w0, w1, w2
    return v0, v1, v2


# ---------------------------------------------------------------------------
# lookup

def _assign_faces(pts):
    """First matching face (in id order) for each point; returns ids and
    the per-point face vertex arrays."""
    n = pts.shape[0]
    ids = np.zeros(n, dtype=np.int64)
    v0 = np.empty((n, 3))
    v1 = np.empty((n, 3))
    v2 = np.empty((n, 3))
    open_ = np.ones(n, dtype=bool)
    for i in range(8):
        a, b, c = _FACE_VERTS[i]
        m = open_ & (
            (np.cross(a, b) @ pts.T >= -EDGE_EPSILON)
            & (np.cross(b, c) @ pts.T >= -EDGE_EPSILON)
            & (np.cross(c, a) @ pts.T >= -EDGE_EPSILON)
        )
        if m.any():
            ids[m] = FIRST_FACE_ID + i
            v0[m] = a
            v1[m] = b
            v2[m] = c
            open_ &= ~m
        if not open_.any():
            break
    if open_.any():
        # Cannot happen for unit vectors given the edge slack; guard anyway.
        raise DomainError("point could not be assigned to an octahedron face")
    return ids, v0, v1, v2


def htm_lookup_batch(points, depth: int, return_vertices: bool = False):
    """Trixel IDs at the given depth for an (n, 3) array of unit vectors.

    Descent tests children in index order and keeps the first containing
    one, which makes points on shared edges resolve deterministically.
    """
    if not 0 <= depth <= MAX_DEPTH:
        raise DomainError("depth must be in [0, %d]" % MAX_DEPTH)
    pts = np.ascontiguousarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise DomainError("points must be an (n, 3) array")
    ids, v0, v1, v2 = _assign_faces(pts)
    for _ in range(depth):
        w0 = _norm_rows(v1 + v2)
        w1 = _norm_rows(v0 + v2)
        w2 = _norm_rows(v0 + v1)
        undecided = np.ones(len(ids), dtype=bool)
        ids <<= 2
        for child, (a, b, c) in enumerate(
            ((v0, w2, w1), (v1, w0, w2), (v2, w1, w0), (w0, w1, w2))
        ):
            if child == 3:
                m = undecided
            else:
                m = undecided & (
                    (_edge_side(a, b, pts) >= -EDGE_EPSILON)
                    & (_edge_side(b, c, pts) >= -EDGE_EPSILON)
                    & (_edge_side(c, a, pts) >= -EDGE_EPSILON)
                )
            if not m.any():
                continue
            ids[m] += child
            if child != 0:
                v0[m] = a[m]
            v1[m] = b[m]
            v2[m] = c[m]
            undecided = undecided & ~m
            if not undecided.any():
                break
    if return_vertices:
        return ids, (v0, v1, v2)
    return ids


def htm_lookup(p, depth: int) -> int:
    """Trixel ID containing one unit vector at the given depth."""
    pts = np.asarray(p, dtype=float).reshape(1, 3)
    return int(htm_lookup_batch(pts, depth)[0])


def htm_lookup_radec(ra: float, dec: float, depth: int) -> int:
    return htm_lookup(radec_to_unit(ra, dec), depth)


# ---------------------------------------------------------------------------
# regions

@dataclass(frozen=True)
class Halfspace:
    """Spherical cap {p : p . normal >= offset}."""

    normal: tuple[float, float, float]
    offset: float

    def __post_init__(self):
        n = math.sqrt(sum(c * c for c in self.normal))
        if abs(n - 1.0) > 1e-9:
            raise DomainError("halfspace normal must be a unit vector")
        if not -1.0 <= self.offset <= 1.0:
            raise DomainError("halfspace offset must be in [-1, 1]")


@dataclass(frozen=True)
class ConvexRegion:
    """Intersection of one or more halfspace caps."""

    halfspaces: tuple[Halfspace, ...]

    def __post_init__(self):
        if not self.halfspaces:
            raise DomainError("a region needs at least one halfspace")

    def arrays(self):
        normals = np.array([h.normal for h in self.halfspaces])
        offsets = np.array([h.offset for h in self.halfspaces])
        return normals, offsets

    def contains(self, p) -> bool:
        return all(
            p[0] * h.normal[0] + p[1] * h.normal[1] + p[2] * h.normal[2]
            >= h.offset
            for h in self.halfspaces
        )


def circle_to_region(ra: float, dec: float, radius: float) -> ConvexRegion:
    """Cap of the given angular radius (degrees) around (ra, dec)."""
    if not 0.0 <= radius <= 180.0:
        raise DomainError("circle radius must be in [0, 180], got %r" % (radius,))
    return ConvexRegion(
        (Halfspace(radec_to_unit(ra, dec), math.cos(math.radians(radius))),)
    )


def polygon_to_region(vertices) -> ConvexRegion:
    """Region bounded by great-circle edges through consecutive vertices.

    Vertices are (ra, dec) pairs listed counter-clockwise as seen from
    outside the sphere; the polygon must be convex.
    """
    if len(vertices) < 3:
        raise DomainError("a polygon needs at least 3 vertices")
    units = [radec_to_unit(ra, dec) for ra, dec in vertices]
    halves = []
    for i, a in enumerate(units):
        b = units[(i + 1) % len(units)]
        n = np.cross(a, b)
        norm = np.linalg.norm(n)
        if norm < 1e-12:
            raise InvalidPolygonError(
                "edge %d joins coincident or antipodal vertices" % i
            )
        halves.append(Halfspace(tuple(n / norm), 0.0))
    for j, v in enumerate(units):
        for i, h in enumerate(halves):
            if np.dot(v, h.normal) < -EDGE_EPSILON:
                raise InvalidPolygonError(
                    "vertex %d falls outside edge %d: polygon is non-convex "
                    "or wound clockwise" % (j, i)
                )
    return ConvexRegion(tuple(halves))


# ---------------------------------------------------------------------------
# covers

def _children_of(ids, v0, v1, v2):
    """All four children of each input trixel, concatenated per child index."""
    w0 = _norm_rows(v1 + v2)
    w1 = _norm_rows(v0 + v2)
    w2 = _norm_rows(v0 + v1)
    base = ids << 2
    cids = np.concatenate([base, base + 1, base + 2, base + 3])
    c0 = np.concatenate([v0, v1, v2, w0])
    c1 = np.concatenate([w2, w0, w1, w1])
    c2 = np.concatenate([w1, w2, w0, w2])
    return cids, c0, c1, c2


def _bounding_cones(v0, v1, v2):
    centers = _norm_rows(v0 + v1 + v2)
    r = np.maximum(
        np.arccos(np.clip(_dot_rows(centers, v0), -1.0, 1.0)),
        np.maximum(
            np.arccos(np.clip(_dot_rows(centers, v1), -1.0, 1.0)),
            np.arccos(np.clip(_dot_rows(centers, v2), -1.0, 1.0)),
        ),
    )
    return centers, r


def _classify(v0, v1, v2, normals, cap_radii):
    """Bounding-cone tests against every cap.

    Returns (full, disjoint) masks.  Both are conservative: full only when
    every cap provably contains the whole cone, disjoint only when some cap
    is provably separated from it.
    """
    centers, brad = _bounding_cones(v0, v1, v2)
    full = np.ones(len(centers), dtype=bool)
    disjoint = np.zeros(len(centers), dtype=bool)
    for n, cr in zip(normals, cap_radii):
        if cr >= math.pi - 1e-12:  # whole-sphere cap constrains nothing
            continue
        ad = np.arccos(np.clip(centers @ n, -1.0, 1.0))
        full &= ad + brad <= cr - _PAD
        disjoint |= ad - brad > cr + _PAD
    return full, disjoint


def _arc_to_triangle(v0, v1, v2, n):
    """Min arc distance (radians) from direction n to each spherical
    triangle; 0 when n lies inside."""
    m = len(v0)
    nn = np.broadcast_to(np.asarray(n, dtype=float), (m, 3))
    inside = (
        (_edge_side(v0, v1, nn) >= -EDGE_EPSILON)
        & (_edge_side(v1, v2, nn) >= -EDGE_EPSILON)
        & (_edge_side(v2, v0, nn) >= -EDGE_EPSILON)
    )
    best = np.full(m, np.inf)
    for a, b in ((v0, v1), (v1, v2), (v2, v0)):
        en = _norm_rows(_cross_rows(a, b))
        sin_d = en @ n
        # closest point of the edge's great circle to n
        t = nn - sin_d[:, None] * en
        tn = np.sqrt(_dot_rows(t, t))
        ok = tn > 1e-12
        t = np.where(ok[:, None], t / np.where(ok, tn, 1.0)[:, None], t)
        within = ok & (_edge_side(a, t, en) >= -EDGE_EPSILON) & (
            _edge_side(t, b, en) >= -EDGE_EPSILON
        )
        d_circle = np.arcsin(np.clip(np.abs(sin_d), 0.0, 1.0))
        d_ends = np.minimum(
            np.arccos(np.clip(a @ n, -1.0, 1.0)),
            np.arccos(np.clip(b @ n, -1.0, 1.0)),
        )
        best = np.minimum(best, np.where(within, d_circle, d_ends))
    return np.where(inside, 0.0, best)


def _intersects_caps(v0, v1, v2, normals, cap_radii):
    """Per-trixel mask: not provably disjoint from any cap (exact per-cap
    triangle test, so exact for single-cap regions)."""
    keep = np.ones(len(v0), dtype=bool)
    for n, cr in zip(normals, cap_radii):
        if cr >= math.pi - 1e-12:
            continue
        keep &= _arc_to_triangle(v0, v1, v2, n) <= cr + _PAD
    return keep


def _merge_ranges(ranges):
    if not ranges:
        return []
    ranges.sort()
    merged = [ranges[0]]
    for lo, hi in ranges[1:]:
        if lo <= merged[-1][1]:
            if hi > merged[-1][1]:
                merged[-1] = (merged[-1][0], hi)
        else:
            merged.append((lo, hi))
    return [(int(lo), int(hi)) for lo, hi in merged]


def _cover(region, depth, max_ranges):
    normals, offsets = region.arrays()
    cap_radii = np.arccos(np.clip(offsets, -1.0, 1.0))
    ids = np.arange(FIRST_FACE_ID, FIRST_FACE_ID + 8, dtype=np.int64)
    v0 = _FACE_VERTS[:, 0].copy()
    v1 = _FACE_VERTS[:, 1].copy()
    v2 = _FACE_VERTS[:, 2].copy()
    ranges = []

    def emit(emit_ids, d):
        shift = 2 * (depth - d)
        for t in emit_ids:
            ranges.append((int(t) << shift, (int(t) + 1) << shift))

    for d in range(depth + 1):
        full, disjoint = _classify(v0, v1, v2, normals, cap_radii)
        emit(ids[full], d)
        partial = ~(full | disjoint)
        if d == depth:
            keep = partial.copy()
            keep[partial] = _intersects_caps(
                v0[partial], v1[partial], v2[partial], normals, cap_radii
            )
            emit(ids[keep], d)
            break
        ids, v0, v1, v2 = ids[partial], v0[partial], v1[partial], v2[partial]
        if len(ids) == 0:
            break
        if max_ranges is not None and 4 * len(ids) > max_ranges:
            # budget exhausted: keep the remaining partial trixels whole
            emit(ids, d)
            break
        ids, v0, v1, v2 = _children_of(ids, v0, v1, v2)
    return _merge_ranges(ranges)


def cover(region: ConvexRegion, depth: int) -> list[tuple[int, int]]:
    """Sorted, disjoint, merged leaf-depth ID ranges covering the region.

    Sound: every depth-`depth` trixel intersecting the region lands inside
    some range.  Boundary trixels are included whole, so the cover may
    conservatively take in trixels just outside the region.
    """
    if not 0 <= depth <= MAX_DEPTH:
        raise DomainError("depth must be in [0, %d]" % MAX_DEPTH)
    return _cover(region, depth, None)


def cover_adaptive(
    region: ConvexRegion, depth: int = MAX_DEPTH, max_ranges: int = 4096
) -> list[tuple[int, int]]:
    """Cover with a bounded range count.

    Descends toward `depth` but stops subdividing once the frontier would
    push the range list past `max_ranges`, keeping the remaining boundary
    trixels whole.  Ranges are always expressed at leaf depth `depth`.
    """
    if not 0 <= depth <= MAX_DEPTH:
        raise DomainError("depth must be in [0, %d]" % MAX_DEPTH)
    if max_ranges < 8:
        raise DomainError("max_ranges must be at least 8")
    ranges = _cover(region, depth, max_ranges)
    if len(ranges) > max_ranges:
        # bridge the narrowest gaps (covering a little extra is sound)
        gaps = sorted(
            range(len(ranges) - 1),
            key=lambda i: ranges[i + 1][0] - ranges[i][1],
        )
        drop = set(gaps[: len(ranges) - max_ranges])
        merged = [ranges[0]]
        for i, r in enumerate(ranges[1:]):
            if i in drop:
                merged[-1] = (merged[-1][0], r[1])
            else:
                merged.append(r)
        ranges = merged
    return ranges

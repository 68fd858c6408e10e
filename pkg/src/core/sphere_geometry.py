"""
Round-sphere primitives.

Points are unit 3-vectors. Areas are normalized so the whole sphere has area 1;
lengths of curves are plain radians on the unit sphere.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Tuple, Union

import numpy as np

from core.errors import AntipodalPair, NearPole, SamplingExhausted

UNIT_TOLERANCE = 1e-12
ANTIPODAL_TOLERANCE = 1e-9
EQUATOR_DEAD_ZONE = 1e-12
POLE_TOLERANCE = 1e-6
DEFAULT_SEPARATION_FLOOR = 1e-9
MAX_REJECTIONS = 1000
GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))

Z_AXIS = np.array([0.0, 0.0, 1.0])
DEFAULT_PROJECTION_POLE = np.array([0.0, 1.0, 0.0])


def normalize(v) -> np.ndarray:
    """Normalize the last axis of an array of vectors"""
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norm == 0.0):
        raise ValueError("Cannot normalize a zero vector")
    return v / norm


@dataclass(frozen=True)
class SpherePoint:
    x: float
    y: float
    z: float

    def __post_init__(self):
        norm = math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
        if abs(norm - 1.0) > UNIT_TOLERANCE:
            if norm == 0.0:
                raise ValueError("SpherePoint needs a non-zero vector")
            object.__setattr__(self, "x", self.x / norm)
            object.__setattr__(self, "y", self.y / norm)
            object.__setattr__(self, "z", self.z / norm)

    @classmethod
    def from_vector(cls, v) -> "SpherePoint":
        v = np.asarray(v, dtype=float)
        return cls(float(v[0]), float(v[1]), float(v[2]))

    @classmethod
    def from_lat_lon(cls, lat: float, lon: float) -> "SpherePoint":
        return cls(math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat))

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


PointLike = Union[SpherePoint, Sequence[float], np.ndarray]


def as_vector(p: PointLike) -> np.ndarray:
    if isinstance(p, SpherePoint):
        return p.vector
    return normalize(p)


def angle_between(p, q) -> np.ndarray:
    """Geodesic distance, stable for nearly equal and nearly antipodal points"""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    cross = np.linalg.norm(np.cross(p, q), axis=-1)
    dot = np.sum(p * q, axis=-1)
    return np.arctan2(cross, dot)


@dataclass(frozen=True)
class GeodesicArc:
    """Constant-speed great-circle arc, parametrized by s in [0, 1]"""
    start: np.ndarray
    end: np.ndarray
    length: float

    def __call__(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return _slerp(self.start, self.end, self.length, s[..., None])

    def samples(self, count: int) -> np.ndarray:
        return self(np.linspace(0.0, 1.0, count))


def _slerp(p, q, theta, s):
    theta = np.asarray(theta, dtype=float)
    small = theta < 1e-12
    safe = np.where(small, 1.0, theta)
    sin_theta = np.sin(safe)
    a = np.where(small, 1.0 - s, np.sin((1.0 - s) * safe) / sin_theta)
    b = np.where(small, s, np.sin(s * safe) / sin_theta)
    return normalize(a * p + b * q)


def geodesic(p: PointLike, q: PointLike) -> GeodesicArc:
    """Shortest great-circle arc from p to q"""
    pv, qv = as_vector(p), as_vector(q)
    theta = float(angle_between(pv, qv))
    if theta >= math.pi - ANTIPODAL_TOLERANCE:
        raise AntipodalPair(f"Points are antipodal (angle={theta:.12f}); shortest path is not unique")
    return GeodesicArc(pv, qv, theta)


def geodesic_samples(P: np.ndarray, Q: np.ndarray, count: int) -> np.ndarray:
    """Sample arcs P[i] -> Q[i] at `count` evenly spaced parameters; shape (count, *P.shape)"""
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    theta = angle_between(P, Q)
    if np.any(theta >= math.pi - ANTIPODAL_TOLERANCE):
        raise AntipodalPair("Closing arc joins antipodal points")
    s = np.linspace(0.0, 1.0, count).reshape((count,) + (1,) * P.ndim)
    out = _slerp(P[None], Q[None], theta[None, ..., None], s)
    out[0] = P
    out[-1] = Q
    return out


class Hemisphere(Enum):
    PLUS = "plus"
    MINUS = "minus"
    ON_EQUATOR = "on_equator"


def hemisphere_of(p: PointLike, equator_axis: PointLike = Z_AXIS) -> Hemisphere:
    d = float(np.dot(as_vector(p), as_vector(equator_axis)))
    if abs(d) < EQUATOR_DEAD_ZONE:
        return Hemisphere.ON_EQUATOR
    return Hemisphere.PLUS if d > 0 else Hemisphere.MINUS


def cap_area(radius: float) -> float:
    """Normalized area of a geodesic disk"""
    return (1.0 - math.cos(radius)) / 2.0


def cap_radius(area: float) -> float:
    if not 0.0 < area < 1.0:
        raise ValueError(f"Disk area must lie in (0, 1), got {area}")
    return math.acos(1.0 - 2.0 * area)


@dataclass(frozen=True)
class Disk:
    center: SpherePoint
    radius: float

    def __post_init__(self):
        if not 0.0 < self.radius < math.pi:
            raise ValueError(f"Disk radius must lie in (0, pi), got {self.radius}")

    @classmethod
    def from_area(cls, center: SpherePoint, area: float) -> "Disk":
        return cls(center, cap_radius(area))

    @property
    def area(self) -> float:
        return cap_area(self.radius)

    def contains(self, points) -> np.ndarray:
        return angle_between(np.asarray(points, dtype=float), self.center.vector) < self.radius

    def scaled(self, r: float) -> "Disk":
        """Same center, area multiplied by r"""
        return Disk.from_area(self.center, self.area * r)

    def sample_points(self, count: int) -> np.ndarray:
        """Sunflower pattern of `count` points covering the disk, boundary included"""
        c = self.center.vector
        e1, e2 = tangent_basis(c)
        i = np.arange(count, dtype=float)
        # area-uniform radii inside the cap; the last point sits on the boundary
        area_fraction = (i + 1.0) / count
        rho = np.arccos(1.0 - area_fraction * (1.0 - math.cos(self.radius)))
        phi = i * GOLDEN_ANGLE
        direction = np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2
        return np.cos(rho)[:, None] * c + np.sin(rho)[:, None] * direction


def tangent_basis(c: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Right-handed orthonormal basis (e1, e2) of the tangent plane at c, with e1 x e2 = c"""
    c = normalize(c)
    helper = Z_AXIS if abs(c[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = normalize(np.cross(helper, c))
    e2 = np.cross(c, e1)
    return e1, e2


@dataclass(frozen=True, eq=False)
class Configuration:
    """Ordered n-tuple of pairwise distinct sphere points, stored as an (n, 3) array"""
    points: np.ndarray

    def __post_init__(self):
        pts = normalize(np.array(self.points, dtype=float))
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"Configuration needs an (n, 3) array, got shape {pts.shape}")
        if pts.shape[0] < 2:
            raise ValueError("Configuration needs at least 2 points")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def min_separation(self) -> float:
        d = angle_between(self.points[:, None, :], self.points[None, :, :])
        iu = np.triu_indices(self.n, 1)
        return float(d[iu].min())

    def is_separated(self, floor: float = DEFAULT_SEPARATION_FLOOR) -> bool:
        return self.min_separation() > floor

    def count_in(self, axis: PointLike = Z_AXIS) -> int:
        return int(np.sum(self.points @ as_vector(axis) > 0.0))


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for shard `key`; reproducible regardless of scheduling"""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def uniform_points(rng: np.random.Generator, size) -> np.ndarray:
    """Area-uniform points; `size` is the leading shape"""
    shape = (size,) if isinstance(size, int) else tuple(size)
    return normalize(rng.standard_normal(shape + (3,)))


def _place_separated(draw_one, n: int, floor: float) -> np.ndarray:
    points = []
    for i in range(n):
        rejections = 0
        while True:
            p = draw_one(i)
            if not points or float(np.min(angle_between(np.array(points), p))) > floor:
                points.append(p)
                break
            rejections += 1
            if rejections >= MAX_REJECTIONS:
                raise SamplingExhausted(
                    f"{MAX_REJECTIONS} consecutive rejections placing point {len(points) + 1} "
                    f"of {n} with separation floor {floor}"
                )
    return np.array(points)


def sample_configuration(rng: np.random.Generator, n: int,
                         separation_floor: float = DEFAULT_SEPARATION_FLOOR) -> Configuration:
    if n < 2:
        raise ValueError(f"Strand count must be >= 2, got {n}")
    pts = _place_separated(lambda i: uniform_points(rng, 1)[0], n, separation_floor)
    return Configuration(pts)


def reflect_into(points: np.ndarray, hemisphere_signs: np.ndarray, axis: np.ndarray = Z_AXIS) -> np.ndarray:
    """Reflect points across the equator plane so that sign(p . axis) matches the requested signs"""
    d = points @ axis
    flip = np.sign(d) != hemisphere_signs
    out = points.copy()
    out[flip] -= 2.0 * d[flip, None] * axis
    return out


def sample_stratum_configuration(rng: np.random.Generator, n: int, k: int,
                                 separation_floor: float = DEFAULT_SEPARATION_FLOOR,
                                 axis: np.ndarray = Z_AXIS) -> Configuration:
    """Area-uniform configuration conditioned on exactly k points in D+; the D+ block comes first"""
    if not 0 <= k <= n:
        raise ValueError(f"Stratum index must satisfy 0 <= k <= n, got k={k}, n={n}")
    signs = np.array([1.0] * k + [-1.0] * (n - k))

    def draw_one(i):
        return reflect_into(uniform_points(rng, 1), signs[i:i + 1], axis)[0]

    return Configuration(_place_separated(draw_one, n, separation_floor))


def stratum_volume(n: int, k: int, area_plus: float) -> float:
    """Measure of X_{n,k}(D+) in the ordered-tuple measure (total sphere area 1)"""
    if not 0 <= k <= n:
        raise ValueError(f"Stratum index must satisfy 0 <= k <= n, got k={k}, n={n}")
    if not 0.0 <= area_plus <= 1.0:
        raise ValueError(f"Hemisphere area must lie in [0, 1], got {area_plus}")
    return math.comb(n, k) * area_plus ** k * (1.0 - area_plus) ** (n - k)


def base_configuration(n: int, k: int) -> Configuration:
    """Deterministic low-discrepancy base point for stratum k, at least 0.35 rad off the equator"""
    rows = []
    for block, count, sign, offset in ((0, k, 1.0, 0.3), (1, n - k, -1.0, 1.9)):
        for i in range(count):
            lat = sign * (0.35 + 0.85 * (i + 0.5) / count)
            lon = offset + i * GOLDEN_ANGLE
            rows.append(SpherePoint.from_lat_lon(lat, lon).vector)
    return Configuration(np.array(rows))


def projection_basis(pole: PointLike) -> Tuple[np.ndarray, np.ndarray]:
    """Planar basis for stereographic projection from `pole`; orientation preserving"""
    P = as_vector(pole)
    e2 = Z_AXIS - np.dot(Z_AXIS, P) * P
    if np.linalg.norm(e2) < 1e-8:
        e2 = np.array([0.0, 1.0, 0.0]) - P[1] * P
    e2 = normalize(e2)
    e1 = np.cross(P, e2)
    return e1, e2


def project_array(points: np.ndarray, pole: PointLike) -> np.ndarray:
    """Vectorized stereographic projection; callers check distance to the pole"""
    P = as_vector(pole)
    e1, e2 = projection_basis(P)
    denom = 1.0 - points @ P
    return np.stack([(points @ e1) / denom, (points @ e2) / denom], axis=-1)


def stereographic_project(p: PointLike, pole: PointLike) -> np.ndarray:
    pv = as_vector(p)
    if float(angle_between(pv, as_vector(pole))) <= POLE_TOLERANCE:
        raise NearPole(f"Point lies within {POLE_TOLERANCE} rad of the projection pole")
    return project_array(pv, pole)


def inverse_stereographic(w, pole: PointLike) -> np.ndarray:
    P = as_vector(pole)
    e1, e2 = projection_basis(P)
    w = np.asarray(w, dtype=float)
    r2 = np.sum(w * w, axis=-1, keepdims=True)
    planar = w[..., :1] * e1 + w[..., 1:2] * e2
    return (2.0 * planar + (r2 - 1.0) * P) / (r2 + 1.0)

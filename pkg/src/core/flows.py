"""
Time-dependent Hamiltonian flows on the unit sphere.

Convention: the vector field of H is X = grad H x p, so a positive Hamiltonian
turns counterclockwise around its maximum when viewed from outside. Every
Hamiltonian exposes an *ambient* gradient (gradient of some extension to R^3);
its tangential part is the sphere gradient, and X = ambient_gradient x p.

The integrator is the implicit midpoint rule on SO(3): a step of size h rotates
p by h * W about W, where W is the ambient gradient at the step midpoint. Rigid
rotations and radial twists are integrated exactly, steps are time symmetric,
and points never leave the sphere.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import roots_legendre

from core.errors import CollarTooWide, LayoutInfeasible, QuadratureTooCoarse, StepSizeInvalid
from core.sphere_geometry import (
    Disk, SpherePoint, Z_AXIS, angle_between, as_vector, normalize, uniform_points,
)

logger = logging.getLogger(__name__)

DEFAULT_STEP_SIZE = 0.01
FIXED_POINT_TOLERANCE = 1e-14
FIXED_POINT_ITERATIONS = 30
MAX_REFINEMENTS = 3
TWIST_MARGIN = 0.05
TWIST_TRANSITION = 0.3
COLLAR_EDGE = 0.95  # outer edge of the cutoff transition, in units of delta


def rotate(P: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Rotate points P about the vectors W by the angles |W| (Rodrigues)"""
    theta = np.linalg.norm(W, axis=-1, keepdims=True)
    small = theta < 1e-300
    k = W / np.where(small, 1.0, theta)
    cos_t = np.cos(theta)
    sin_t = np.sin(theta)
    kxp = np.cross(k, P)
    kdp = np.sum(k * P, axis=-1, keepdims=True)
    out = P * cos_t + kxp * sin_t + k * kdp * (1.0 - cos_t)
    return normalize(np.where(small, P, out))


def smootherstep(t):
    """C2 ramp 6t^5 - 15t^4 + 10t^3 clipped to [0, 1]"""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def smootherstep_integral(t):
    """Antiderivative of smootherstep on [0, 1], zero at 0"""
    t = np.clip(t, 0.0, 1.0)
    return t ** 4 * (t * (t - 3.0) + 2.5)


class Hamiltonian:
    """Base class for Hamiltonians; subclasses implement evaluate and ambient_gradient"""

    autonomous = True

    def evaluate(self, t: float, P: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def ambient_gradient(self, t: float, P: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, t: float, P: np.ndarray) -> np.ndarray:
        """Sphere gradient: tangential part of the ambient gradient"""
        P = np.asarray(P, dtype=float)
        G = self.ambient_gradient(t, P)
        return G - np.sum(G * P, axis=-1, keepdims=True) * P

    def vector_field(self, t: float, P: np.ndarray) -> np.ndarray:
        P = np.asarray(P, dtype=float)
        return np.cross(self.ambient_gradient(t, P), P)

    def support_hint(self) -> Optional[List[float]]:
        """Polar-angle breakpoints (radians from +z) where the field changes character"""
        return None

    def is_zero(self) -> bool:
        return False


@dataclass(frozen=True)
class ZeroHamiltonian(Hamiltonian):
    def evaluate(self, t, P):
        return np.zeros(np.shape(P)[:-1])

    def ambient_gradient(self, t, P):
        return np.zeros(np.shape(P))

    def is_zero(self):
        return True


@dataclass(frozen=True)
class AxisRotationHamiltonian(Hamiltonian):
    """H(p) = rate * <p, axis>: rigid rotation about axis at angular speed rate"""
    axis: Tuple[float, float, float]
    rate: float

    def evaluate(self, t, P):
        return self.rate * (np.asarray(P) @ np.asarray(self.axis))

    def ambient_gradient(self, t, P):
        return np.broadcast_to(self.rate * np.asarray(self.axis), np.shape(P)).copy()

    def support_hint(self):
        return None

    def is_zero(self):
        return self.rate == 0.0


@dataclass(frozen=True)
class RadialTwistHamiltonian(Hamiltonian):
    """
    Twist about `center`: points within `inner_radius` turn rigidly at angular
    speed `rate`, points beyond `outer_radius` stay put. With u = <p, center>,
    u1 = cos(inner), u2 = cos(outer), s = (u - u2)/(u1 - u2), the angular speed is
    rate * S(s) where S(s) = 6s^5 - 15s^4 + 10s^3 on [0, 1] (C2), and
    H = rate * (u1 - u2) * int_0^s S  for s <= 1,  H = rate * ((u1 - u2)/2 + u - u1) beyond.
    """
    center: Tuple[float, float, float]
    rate: float
    inner_radius: float
    outer_radius: float

    def __post_init__(self):
        if not 0.0 < self.inner_radius < self.outer_radius < math.pi:
            raise ValueError("Twist radii must satisfy 0 < inner < outer < pi")

    @property
    def _u1(self):
        return math.cos(self.inner_radius)

    @property
    def _u2(self):
        return math.cos(self.outer_radius)

    def _s(self, P):
        u = np.asarray(P) @ np.asarray(self.center)
        return u, (u - self._u2) / (self._u1 - self._u2)

    def evaluate(self, t, P):
        u, s = self._s(P)
        width = self._u1 - self._u2
        inside = self.rate * (0.5 * width + (u - self._u1))
        ramp = self.rate * width * smootherstep_integral(s)
        return np.where(s >= 1.0, inside, ramp)

    def ambient_gradient(self, t, P):
        _, s = self._s(P)
        speed = self.rate * smootherstep(s)
        return speed[..., None] * np.asarray(self.center)

    def support_hint(self):
        c = np.asarray(self.center)
        if abs(abs(c[2]) - 1.0) > 1e-12:
            return None
        polar = [self.inner_radius, self.outer_radius]
        return polar if c[2] > 0 else [math.pi - r for r in polar]

    def is_zero(self):
        return self.rate == 0.0


def cutoff_profile(u):
    """
    Cutoff chi with chi = 1 for |u| <= 1/3, chi = 0 for |u| >= 0.95 and |chi'| <= 2.
    On the transition the slope -chi' ramps up with a cubic smoothstep over a
    length r, stays at 2, and ramps down over r again (so chi is C2).
    Returns (chi, dchi/du).
    """
    a, e = 1.0 / 3.0, COLLAR_EDGE
    r = (e - a) - 0.5
    x = np.abs(np.asarray(u, dtype=float))
    sign = np.sign(np.asarray(u, dtype=float))

    def smooth(t):
        return t * t * (3.0 - 2.0 * t)

    def smooth_integral(t):
        return t ** 3 - 0.5 * t ** 4

    t1 = np.clip((x - a) / r, 0.0, 1.0)
    t3 = np.clip((e - x) / r, 0.0, 1.0)
    chi = np.select(
        [x <= a, x <= a + r, x <= e - r, x < e],
        [1.0, 1.0 - 2.0 * r * smooth_integral(t1), 1.0 - r - 2.0 * (x - a - r), 2.0 * r * smooth_integral(t3)],
        default=0.0,
    )
    slope = np.select(
        [x <= a, x <= a + r, x <= e - r, x < e],
        [0.0, -2.0 * smooth(t1), -2.0, -2.0 * smooth(t3)],
        default=0.0,
    )
    return chi, sign * slope


@dataclass(frozen=True)
class BoundaryIsotopy:
    """Autonomous circle flow q' = rate + sum_m a_m sin(m q) on the equator"""
    rate: float = 0.0
    modes: Tuple[Tuple[int, float], ...] = ()

    def velocity(self, q):
        v = np.full(np.shape(q), float(self.rate))
        for m, a in self.modes:
            v = v + a * np.sin(m * q)
        return v

    def velocity_derivative(self, q):
        dv = np.zeros(np.shape(q))
        for m, a in self.modes:
            dv = dv + a * m * np.cos(m * q)
        return dv

    def is_identity(self) -> bool:
        return self.rate == 0.0 and all(a == 0.0 for _, a in self.modes)

    def time_one_map(self, q, step_size: float = DEFAULT_STEP_SIZE):
        """Equator angle after unit time, with the same midpoint rule the sphere integrator uses"""
        q = np.asarray(q, dtype=float)
        steps = max(1, int(math.ceil(1.0 / step_size - 1e-12)))
        h = 1.0 / steps
        for _ in range(steps):
            mid = q
            for _ in range(FIXED_POINT_ITERATIONS):
                new_mid = q + 0.5 * h * self.velocity(mid)
                done = np.max(np.abs(new_mid - mid)) <= FIXED_POINT_TOLERANCE
                mid = new_mid
                if done:
                    break
            q = q + h * self.velocity(mid)
        return q


@dataclass(frozen=True)
class CollarHamiltonian(Hamiltonian):
    """
    G(p) = chi(lat/delta) * z * v(q) with z the height, lat = asin z, q the longitude
    and v the boundary velocity. On the equator the flow is q' = v(q), z stays 0.
    """
    delta: float
    boundary: BoundaryIsotopy

    def _parts(self, P):
        P = np.asarray(P, dtype=float)
        z = np.clip(P[..., 2], -1.0, 1.0)
        lat = np.arcsin(z)
        chi, dchi = cutoff_profile(lat / self.delta)
        q = np.arctan2(P[..., 1], P[..., 0])
        return P, z, lat, chi, dchi, q

    def evaluate(self, t, P):
        _, z, _, chi, _, q = self._parts(P)
        return chi * z * self.boundary.velocity(q)

    def ambient_gradient(self, t, P):
        P, z, lat, chi, dchi, q = self._parts(P)
        support = chi > 0.0
        cos_lat = np.where(support, np.cos(lat), 1.0)
        v = self.boundary.velocity(q)
        dG_dz = v * (chi + z * dchi / (self.delta * cos_lat))
        dG_dq = chi * z * self.boundary.velocity_derivative(q)
        rho2 = np.where(support, P[..., 0] ** 2 + P[..., 1] ** 2, 1.0)
        grad_q = np.stack([-P[..., 1] / rho2, P[..., 0] / rho2, np.zeros_like(rho2)], axis=-1)
        out = dG_dz[..., None] * Z_AXIS + dG_dq[..., None] * grad_q
        return np.where(support[..., None], out, 0.0)

    def _speed_kink(self) -> float:
        """Collar coordinate where dG/dz changes sign, so |grad G| has a corner there"""
        a, e = 1.0 / 3.0, COLLAR_EDGE
        r = (e - a) - 0.5

        def dG_dz(u):
            chi, dchi = cutoff_profile(u)
            return float(chi + math.tan(self.delta * u) / self.delta * dchi)

        return brentq(dG_dz, a, e - r)

    def support_hint(self):
        a, e = 1.0 / 3.0, COLLAR_EDGE
        r = (e - a) - 0.5
        lats = sorted([e, e - r, a + r, a, self._speed_kink()], reverse=True)
        hint = [math.pi / 2 - self.delta * x for x in lats] + [math.pi / 2 + self.delta * x for x in reversed(lats)]
        return hint + [math.pi / 2]

    def is_zero(self):
        return self.boundary.is_identity()


@dataclass(frozen=True)
class RandomFourierHamiltonian(Hamiltonian):
    """H(t, p) = amplitude * sum_j (a_j + b_j cos(2 pi t)) sin(<k_j, p> + phase_j)"""
    wave_vectors: Tuple[Tuple[float, float, float], ...]
    phases: Tuple[float, ...]
    steady: Tuple[float, ...]
    pulsing: Tuple[float, ...]
    amplitude: float = 1.0

    autonomous = False

    @classmethod
    def generate(cls, degree: int, amplitude: float, seed: int) -> "RandomFourierHamiltonian":
        rng = np.random.default_rng(seed)
        modes = 3 * max(1, degree)
        k = rng.standard_normal((modes, 3))
        k *= (degree * rng.uniform(0.3, 1.0, modes) / np.linalg.norm(k, axis=1))[:, None]
        scale = 1.0 / math.sqrt(modes)
        return cls(
            wave_vectors=tuple(map(tuple, k)),
            phases=tuple(rng.uniform(0.0, 2.0 * math.pi, modes)),
            steady=tuple(scale * rng.standard_normal(modes)),
            pulsing=tuple(scale * rng.standard_normal(modes)),
            amplitude=float(amplitude),
        )

    def _weights(self, t):
        return self.amplitude * (np.asarray(self.steady) + np.asarray(self.pulsing) * math.cos(2.0 * math.pi * t))

    def evaluate(self, t, P):
        phase = np.asarray(P) @ np.asarray(self.wave_vectors).T + np.asarray(self.phases)
        return np.sin(phase) @ self._weights(t)

    def ambient_gradient(self, t, P):
        K = np.asarray(self.wave_vectors)
        phase = np.asarray(P) @ K.T + np.asarray(self.phases)
        return (np.cos(phase) * self._weights(t)) @ K

    def is_zero(self):
        return self.amplitude == 0.0


@dataclass(frozen=True)
class ScaledHamiltonian(Hamiltonian):
    base: Hamiltonian
    factor: float

    @property
    def autonomous(self):
        return self.base.autonomous

    def evaluate(self, t, P):
        return self.factor * self.base.evaluate(t, P)

    def ambient_gradient(self, t, P):
        return self.factor * self.base.ambient_gradient(t, P)

    def support_hint(self):
        return self.base.support_hint()

    def is_zero(self):
        return self.factor == 0.0 or self.base.is_zero()


@dataclass(frozen=True)
class Segment:
    """Flow of H over `duration`; H sees the normalized time s/duration. Reversed segments run -H backwards."""
    hamiltonian: Hamiltonian
    duration: float = 1.0
    reversed: bool = False

    def __post_init__(self):
        if not self.duration > 0.0:
            raise ValueError(f"Segment duration must be positive, got {self.duration}")

    def angular_velocity(self, s: float, P: np.ndarray) -> np.ndarray:
        tau = s / self.duration
        if self.reversed:
            return -self.hamiltonian.ambient_gradient(1.0 - tau, P)
        return self.hamiltonian.ambient_gradient(tau, P)

    def speed(self, s: float, P: np.ndarray) -> np.ndarray:
        tau = s / self.duration
        tau = 1.0 - tau if self.reversed else tau
        return np.linalg.norm(self.hamiltonian.gradient(tau, P), axis=-1)


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered samples of a flow; points has shape (m, *batch, 3)"""
    times: np.ndarray
    points: np.ndarray

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]

    def at(self, t: float) -> np.ndarray:
        """Dense output by normalized linear interpolation between samples"""
        i = int(np.clip(np.searchsorted(self.times, t) - 1, 0, len(self.times) - 2))
        t0, t1 = self.times[i], self.times[i + 1]
        w = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
        return normalize((1.0 - w) * self.points[i] + w * self.points[i + 1])

    def max_step_angle(self) -> float:
        if len(self.times) < 2:
            return 0.0
        return float(np.max(angle_between(self.points[1:], self.points[:-1])))


def _midpoint_step(segment: Segment, s: float, h: float, P: np.ndarray) -> np.ndarray:
    s_mid = s + 0.5 * h
    W = segment.angular_velocity(s_mid, P)
    for _ in range(FIXED_POINT_ITERATIONS):
        mid = rotate(P, 0.5 * h * W)
        W_new = segment.angular_velocity(s_mid, mid)
        change = np.max(np.abs(W_new - W)) if W.size else 0.0
        W = W_new
        if change * h <= FIXED_POINT_TOLERANCE:
            break
    return rotate(P, h * W)


@dataclass(frozen=True)
class Isotopy:
    segments: Tuple[Segment, ...] = ()
    step_size: float = DEFAULT_STEP_SIZE

    def __post_init__(self):
        if not (self.step_size > 0.0 and math.isfinite(self.step_size)):
            raise StepSizeInvalid(f"Step size must be positive and finite, got {self.step_size}")
        object.__setattr__(self, "segments", tuple(self.segments))

    @classmethod
    def identity(cls, step_size: float = DEFAULT_STEP_SIZE) -> "Isotopy":
        return cls((), step_size)

    @classmethod
    def from_hamiltonian(cls, hamiltonian: Hamiltonian, duration: float = 1.0,
                         step_size: float = DEFAULT_STEP_SIZE) -> "Isotopy":
        return cls((Segment(hamiltonian, duration),), step_size)

    @property
    def total_duration(self) -> float:
        return float(sum(seg.duration for seg in self.segments))

    def is_identity(self) -> bool:
        return all(seg.hamiltonian.is_zero() for seg in self.segments)

    def _steps(self, segment: Segment) -> Tuple[int, float]:
        steps = max(1, int(math.ceil(segment.duration / self.step_size - 1e-12)))
        return steps, segment.duration / steps

    def integrate(self, P, keep_samples: bool = True):
        """Flow an array of points (any leading shape); returns a Trajectory or the endpoint"""
        P = normalize(np.asarray(P, dtype=float))
        times = [0.0]
        samples = [P]
        clock = 0.0
        for segment in self.segments:
            if segment.hamiltonian.is_zero():
                clock += segment.duration
                if keep_samples:
                    times.append(clock)
                    samples.append(P)
                continue
            steps, h = self._steps(segment)
            for i in range(steps):
                P = _midpoint_step(segment, i * h, h, P)
                if keep_samples:
                    times.append(clock + (i + 1) * h)
                    samples.append(P)
            clock += segment.duration
        if not keep_samples:
            return P
        return Trajectory(np.array(times), np.stack(samples))

    def time_one_map(self, P) -> np.ndarray:
        return self.integrate(P, keep_samples=False)

    def then(self, other: "Isotopy") -> "Isotopy":
        """Run self first, then other"""
        return Isotopy(self.segments + other.segments, min(self.step_size, other.step_size))

    def inverse(self) -> "Isotopy":
        segs = tuple(replace(seg, reversed=not seg.reversed) for seg in reversed(self.segments))
        return Isotopy(segs, self.step_size)

    def iterate(self, k: int) -> "Isotopy":
        if k < 1:
            raise ValueError(f"Iteration count must be >= 1, got {k}")
        return Isotopy(self.segments * k, self.step_size)

    def scaled(self, factor: float) -> "Isotopy":
        segs = tuple(replace(seg, hamiltonian=ScaledHamiltonian(seg.hamiltonian, factor)) for seg in self.segments)
        return Isotopy(segs, self.step_size)

    def with_step_size(self, step_size: float) -> "Isotopy":
        return Isotopy(self.segments, step_size)


def integrate(iso: Isotopy, p) -> Trajectory:
    return iso.integrate(as_vector(p) if isinstance(p, SpherePoint) else p)


def compose(a: Isotopy, b: Isotopy) -> Isotopy:
    """Isotopy of the map a o b: b runs first"""
    return b.then(a)


def inverse(a: Isotopy) -> Isotopy:
    return a.inverse()


def iterate(a: Isotopy, k: int) -> Isotopy:
    return a.iterate(k)


def rotation(axis, angle: float, step_size: float = DEFAULT_STEP_SIZE) -> Isotopy:
    a = as_vector(axis)
    return Isotopy.from_hamiltonian(AxisRotationHamiltonian(tuple(a), float(angle)), 1.0, step_size)


@dataclass(frozen=True)
class QuadratureSpec:
    time_nodes: int = 8
    polar_nodes: int = 48
    azimuth_nodes: int = 96

    def refined(self) -> "QuadratureSpec":
        return QuadratureSpec(2 * self.time_nodes, 2 * self.polar_nodes, 2 * self.azimuth_nodes)


def _sphere_grid(spec: QuadratureSpec, breakpoints: Optional[Sequence[float]]):
    """Points and radius-1 area weights; composite Gauss-Legendre in polar angle"""
    edges = sorted({0.0, math.pi, *[b for b in (breakpoints or []) if 0.0 < b < math.pi]})
    x, w = roots_legendre(spec.polar_nodes)
    polar, polar_w = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        polar.append(lo + half * (x + 1.0))
        polar_w.append(half * w)
    polar = np.concatenate(polar)
    polar_w = np.concatenate(polar_w) * np.sin(polar)
    lon = np.arange(spec.azimuth_nodes) * (2.0 * math.pi / spec.azimuth_nodes)
    lon_w = 2.0 * math.pi / spec.azimuth_nodes
    sp, cp = np.sin(polar)[:, None], np.cos(polar)[:, None]
    pts = np.stack([sp * np.cos(lon), sp * np.sin(lon), np.broadcast_to(cp, (len(polar), len(lon)))], axis=-1)
    weights = polar_w[:, None] * lon_w * np.ones(len(lon))
    return pts.reshape(-1, 3), weights.reshape(-1)


def _lp_length_at(iso: Isotopy, p_exponent: float, spec: QuadratureSpec) -> float:
    total = 0.0
    for segment in iso.segments:
        if segment.hamiltonian.is_zero():
            continue
        pts, area_w = _sphere_grid(spec, segment.hamiltonian.support_hint())
        nodes = 1 if segment.hamiltonian.autonomous else spec.time_nodes
        x, w = roots_legendre(nodes)
        for xi, wi in zip(x, w):
            s = 0.5 * (xi + 1.0) * segment.duration
            speed = segment.speed(s, pts)
            norm = float(np.sum(area_w * speed ** p_exponent)) ** (1.0 / p_exponent)
            total += 0.5 * wi * segment.duration * norm
    return total


def lp_length(iso: Isotopy, p_exponent: float = 1.0, quadrature: Optional[QuadratureSpec] = None,
              tolerance: float = 1e-3, max_refinements: int = MAX_REFINEMENTS) -> float:
    """
    int_0^1 (int_S |X_t|^p dA)^(1/p) dt in radius-1 units (sphere area 4 pi).
    The grid is doubled until two successive estimates agree within `tolerance`
    (relative). If they still disagree after `max_refinements` extra doublings,
    QuadratureTooCoarse is raised. The finest value is returned.
    """
    if p_exponent < 1.0:
        raise ValueError(f"Exponent must be >= 1, got {p_exponent}")
    spec = quadrature or QuadratureSpec()
    if min(spec.time_nodes, spec.polar_nodes, spec.azimuth_nodes) < 1:
        raise QuadratureTooCoarse("Quadrature resolution must be positive")
    coarse = _lp_length_at(iso, p_exponent, spec)
    for attempt in range(max(0, max_refinements) + 1):
        spec = spec.refined()
        fine = _lp_length_at(iso, p_exponent, spec)
        gap = abs(fine - coarse)
        if gap <= 1e-12 or gap / max(abs(fine), 1e-300) <= tolerance:
            if attempt:
                logger.debug(f"lp_length converged after {attempt} extra refinements at {spec}")
            return fine
        coarse = fine
    raise QuadratureTooCoarse(
        f"Successive refinements differ by {gap / max(abs(fine), 1e-300):.2e} relative "
        f"at {spec} (fine={fine:.6g})"
    )


@dataclass(frozen=True)
class TwistLetter:
    """Pure generator A_ij (full twist of disks i and j) with sign"""
    i: int
    j: int
    sign: int = 1

    def __post_init__(self):
        if self.i == self.j or self.sign not in (1, -1):
            raise ValueError(f"Invalid twist letter A{self.i}{self.j}^{self.sign}")

    def __str__(self):
        return f"A{self.i}{self.j}" + ("" if self.sign == 1 else "^-1")


def default_ishida_disks(area: float = 0.02, latitude: float = 0.5) -> Tuple[Disk, Disk, Disk, Disk]:
    """D1, D2 in D+ and D3, D4 in D-, at longitudes 0 and pi; D1/D3 and D2/D4 face each other"""
    return (
        Disk.from_area(SpherePoint.from_lat_lon(latitude, 0.0), area),
        Disk.from_area(SpherePoint.from_lat_lon(latitude, math.pi), area),
        Disk.from_area(SpherePoint.from_lat_lon(-latitude, 0.0), area),
        Disk.from_area(SpherePoint.from_lat_lon(-latitude, math.pi), area),
    )


def check_ishida_layout(disks: Sequence[Disk]) -> Tuple[bool, str]:
    if len(disks) != 4:
        return False, f"Expected 4 disks, got {len(disks)}"
    total = sum(d.area for d in disks)
    if total >= 1.0:
        return False, f"Total disk area {total:.4f} exceeds the sphere"
    for idx, d in enumerate(disks):
        lat = math.asin(max(-1.0, min(1.0, d.center.z)))
        north = idx < 2
        if (north and lat - d.radius <= 0.0) or (not north and -lat - d.radius <= 0.0):
            return False, f"Disk D{idx + 1} leaves its hemisphere"
    for a in range(4):
        for b in range(a + 1, 4):
            gap = float(angle_between(disks[a].center.vector, disks[b].center.vector))
            if gap <= disks[a].radius + disks[b].radius:
                return False, f"Disks D{a + 1} and D{b + 1} overlap"
    return True, "Layout is feasible"


def twist_hamiltonian(disks: Sequence[Disk], letter: TwistLetter) -> RadialTwistHamiltonian:
    """Twist turning D_i and D_j once around each other while leaving the other disks fixed"""
    a, b = disks[letter.i - 1], disks[letter.j - 1]
    ca, cb = a.center.vector, b.center.vector
    mid = ca + cb
    if np.linalg.norm(mid) < 1e-6:
        raise LayoutInfeasible(f"Disks D{letter.i} and D{letter.j} are antipodal; no twist region")
    center = normalize(mid)
    half = 0.5 * float(angle_between(ca, cb))
    inner = half + max(a.radius, b.radius) + TWIST_MARGIN
    outer = inner + TWIST_TRANSITION
    if outer >= math.pi:
        raise LayoutInfeasible(f"Twist region for {letter} wraps the sphere")
    for idx, other in enumerate(disks):
        if idx + 1 in (letter.i, letter.j):
            continue
        if float(angle_between(center, other.center.vector)) - other.radius <= outer:
            raise LayoutInfeasible(f"Twist region for {letter} meets disk D{idx + 1}")
    return RadialTwistHamiltonian(tuple(center), 2.0 * math.pi * letter.sign, inner, outer)


def eggbeater_family(disks: Sequence[Disk], braid_target: Sequence[TwistLetter], r: float = 1.0,
                     step_size: float = DEFAULT_STEP_SIZE) -> Isotopy:
    """
    f_r as a product of autonomous twists, one per pure generator of the target.
    Disks keep their centers and get areas r * a_i. Each twist turns its disks
    by a full turn, so f_r maps every disk onto itself and f_r^k repeats the pattern k times.
    """
    if r <= 0.0:
        raise LayoutInfeasible(f"Scale must be positive, got {r}")
    total = r * sum(d.area for d in disks)
    if total >= 1.0:
        raise LayoutInfeasible(f"Scaled disk areas sum to {total:.4f} >= 1")
    scaled = [Disk.from_area(d.center, d.area * r) for d in disks]
    ok, message = check_ishida_layout(scaled)
    if not ok:
        raise LayoutInfeasible(message)
    segments = tuple(Segment(twist_hamiltonian(scaled, letter), 1.0) for letter in braid_target)
    logger.debug("Built eggbeater with %d twists at scale r=%s", len(segments), r)
    return Isotopy(segments, step_size)


def collar_cutoff_isotopy(boundary_isotopy: BoundaryIsotopy, delta: float,
                          step_size: float = DEFAULT_STEP_SIZE) -> Isotopy:
    """Isotopy supported in |lat| < delta restricting to the boundary flow on the equator"""
    if not 0.0 < delta < math.pi / 2 - 1e-3:
        raise CollarTooWide(f"Collar half-width {delta} does not embed around the equator")
    if boundary_isotopy.is_identity():
        return Isotopy.identity(step_size)
    return Isotopy.from_hamiltonian(CollarHamiltonian(float(delta), boundary_isotopy), 1.0, step_size)


def hemisphere_twist(hemisphere: int, angle: float, outer_radius: float = 1.2,
                     step_size: float = DEFAULT_STEP_SIZE) -> Isotopy:
    """Twist about a pole supported strictly inside one hemisphere (hemisphere = +1 or -1)"""
    if not 0.0 < outer_radius < math.pi / 2:
        raise LayoutInfeasible(f"Hemisphere twist radius {outer_radius} leaves the hemisphere")
    center = (0.0, 0.0, 1.0 if hemisphere > 0 else -1.0)
    inner = 0.5 * outer_radius
    return Isotopy.from_hamiltonian(RadialTwistHamiltonian(center, float(angle), inner, outer_radius), 1.0, step_size)


def random_fourier_isotopy(degree: int, amplitude: float, seed: int,
                           step_size: float = DEFAULT_STEP_SIZE) -> Isotopy:
    return Isotopy.from_hamiltonian(RandomFourierHamiltonian.generate(degree, amplitude, seed), 1.0, step_size)


def image_area_estimate(iso: Isotopy, disk: Disk, rng: np.random.Generator, samples: int) -> Tuple[float, float]:
    """Monte Carlo area of f(disk) as the measure of {p : f^-1(p) in disk}; returns (area, stderr)"""
    pts = uniform_points(rng, samples)
    back = iso.inverse().time_one_map(pts)
    hits = disk.contains(back).astype(float)
    area = float(hits.mean())
    return area, math.sqrt(max(area * (1.0 - area), 1e-300) / samples)


def equator_displacement(iso: Isotopy, points: int = 100) -> float:
    """Largest distance from the equator of the image of equator sample points"""
    q = np.arange(points) * (2.0 * math.pi / points)
    pts = np.stack([np.cos(q), np.sin(q), np.zeros(points)], axis=-1)
    return float(np.max(np.abs(iso.time_one_map(pts)[:, 2])))


def disk_area_check(iso: Isotopy, disk: Disk, rng, samples: int = 100_000) -> Tuple[bool, float, float]:
    area, stderr = image_area_estimate(iso, disk, rng, samples)
    return abs(area - disk.area) <= 3.0 * max(stderr, 1e-12), area, stderr


__all__ = [
    "AxisRotationHamiltonian", "BoundaryIsotopy", "CollarHamiltonian", "Hamiltonian", "Isotopy",
    "QuadratureSpec", "RadialTwistHamiltonian", "RandomFourierHamiltonian", "Segment", "Trajectory",
    "TwistLetter", "ZeroHamiltonian", "collar_cutoff_isotopy", "compose", "cutoff_profile",
    "default_ishida_disks", "eggbeater_family", "equator_displacement", "hemisphere_twist",
    "image_area_estimate", "integrate", "inverse", "iterate", "lp_length", "random_fourier_isotopy",
    "rotate", "rotation", "twist_hamiltonian",
]

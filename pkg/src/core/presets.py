"""
Named flow presets and the families used by the experiment suites.
"""

import math
import re
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from core.errors import ConfigInvalid, ParseError
from core.flows import (
    DEFAULT_STEP_SIZE, BoundaryIsotopy, Isotopy, TwistLetter, collar_cutoff_isotopy, default_ishida_disks,
    eggbeater_family, hemisphere_twist, random_fourier_isotopy, rotation,
)
from core.sphere_geometry import Disk, SpherePoint

FLOW_NAMES = ("identity", "rotation", "eggbeater", "collar", "random-fourier", "hemisphere-twist", "split-twist")

_TWIST = re.compile(r"^A(\d)(\d)(?:\^(\+?1|-1))?$")


def parse_twist_pattern(text: str) -> List[TwistLetter]:
    """Parse 'A13 A24^-1' into twist letters"""
    letters = []
    for token in text.split():
        match = _TWIST.match(token)
        if not match:
            raise ParseError(f"Malformed twist letter '{token}'")
        i, j = int(match.group(1)), int(match.group(2))
        if not (1 <= i <= 4 and 1 <= j <= 4) or i == j:
            raise ParseError(f"Twist letter '{token}' must join two of the disks 1..4")
        letters.append(TwistLetter(min(i, j), max(i, j), -1 if match.group(3) == "-1" else 1))
    if not letters:
        raise ParseError("Twist pattern is empty")
    return letters


def ishida_disks(params: Dict[str, Any]) -> Tuple[Disk, ...]:
    return default_ishida_disks(float(params.get("area", 0.02)), float(params.get("latitude", 0.5)))


def _axis(value) -> Tuple[float, float, float]:
    if value is None:
        return (0.0, 0.0, 1.0)
    if isinstance(value, str):
        named = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}
        if value not in named:
            raise ConfigInvalid(f"Unknown axis '{value}'")
        return named[value]
    v = np.asarray(value, dtype=float)
    if v.shape != (3,) or np.linalg.norm(v) == 0.0:
        raise ConfigInvalid(f"Axis must be a nonzero 3-vector, got {value!r}")
    return tuple(v / np.linalg.norm(v))


def _modes(raw) -> Tuple[Tuple[int, float], ...]:
    return tuple((int(m), float(a)) for m, a in (raw or []))


def build_flow(name: str, params: Optional[Dict[str, Any]] = None, step_size: float = DEFAULT_STEP_SIZE) -> Isotopy:
    params = dict(params or {})
    if name == "identity":
        return Isotopy.identity(step_size)
    if name == "rotation":
        return rotation(SpherePoint.from_vector(_axis(params.get("axis"))), float(params.get("angle", 1.0)), step_size)
    if name == "eggbeater":
        pattern = parse_twist_pattern(params.get("pattern", "A13"))
        return eggbeater_family(ishida_disks(params), pattern, float(params.get("r", 1.0)), step_size)
    if name == "collar":
        boundary = BoundaryIsotopy(float(params.get("rate", 1.0)), _modes(params.get("modes")))
        return collar_cutoff_isotopy(boundary, float(params.get("delta", 0.1)), step_size)
    if name == "random-fourier":
        return random_fourier_isotopy(int(params.get("degree", 2)), float(params.get("amplitude", 1.0)),
                                      int(params.get("seed", 0)), step_size)
    if name == "hemisphere-twist":
        hemisphere = params.get("hemisphere", 1)
        sign = -1 if hemisphere in (-1, "-1", "south", "minus") else 1
        return hemisphere_twist(sign, float(params.get("angle", 2.0 * math.pi)),
                                float(params.get("radius", 1.2)), step_size)
    if name == "split-twist":
        north = hemisphere_twist(1, float(params.get("north_angle", 2.0 * math.pi)), float(params.get("radius", 1.2)),
                                 step_size)
        south = hemisphere_twist(-1, float(params.get("south_angle", -2.0 * math.pi)), float(params.get("radius", 1.2)),
                                 step_size)
        return north.then(south)
    raise ConfigInvalid(f"Unknown flow preset '{name}'", {"known": list(FLOW_NAMES)})


def equator_preserving_family(count: int = 6, step_size: float = DEFAULT_STEP_SIZE) -> Tuple[List[Isotopy], List[float]]:
    """Polar rotations, collar cutoffs and their compositions with hemisphere twists"""
    family, params = [Isotopy.identity(step_size)], [0.0]
    for i in range(1, count + 1):
        angle = 4.0 * math.pi * i / count
        family.append(rotation(SpherePoint(0.0, 0.0, 1.0), angle, step_size))
        params.append(float(i))
    for i, delta in enumerate((0.2, 0.1), start=1):
        collar = collar_cutoff_isotopy(BoundaryIsotopy(1.0, ((2, 0.3),)), delta, step_size)
        twists = hemisphere_twist(1, 2.0 * math.pi * i, 1.2, step_size).then(
            hemisphere_twist(-1, -2.0 * math.pi * i, 1.2, step_size))
        family.append(collar.then(twists))
        params.append(float(count + i))
    return family, params


def random_flow_family(count: int, seed: int, step_size: float = DEFAULT_STEP_SIZE) -> List[Isotopy]:
    """Random Fourier flows with amplitudes spread log-uniformly over three decades, plus the identity"""
    flows = [Isotopy.identity(step_size)]
    amplitudes = np.logspace(-2.5, 0.5, count - 1)
    for i, amp in enumerate(amplitudes):
        flows.append(random_fourier_isotopy(1 + i % 3, float(amp), seed * 1000 + i, step_size))
    return flows

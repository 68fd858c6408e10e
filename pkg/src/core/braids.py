"""
Braid words and their extraction from sphere trajectories.

Words are planar Artin words read off a fixed stereographic projection. A letter
(i, +1) is sigma_i: the strands at positions i and i+1 swap and the one moving
left to right passes with the smaller second planar coordinate. Words compose as
maps do: compose(a, b) runs b first.
"""

import json
import logging
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.errors import ParseError, PoleCollision, StrandMismatch, TangentialCrossing
from core.sphere_geometry import (
    DEFAULT_PROJECTION_POLE, Configuration, as_vector, geodesic_samples, make_rng, normalize, project_array,
)

logger = logging.getLogger(__name__)

POLE_CLEARANCE = 1e-3
TRANSVERSALITY_TOLERANCE = 1e-10
SEPARATION_TOLERANCE = 1e-12
TAIL_SAMPLES = 64
RETRY_JITTER = 1e-6
MAX_RETRIES = 3

Letter = Tuple[int, int]

_TOKEN = re.compile(r"^(?:s|σ)(\d+)(?:\^(\+?1|-1))?$")


def free_reduce(letters: Sequence[Letter]) -> Tuple[Letter, ...]:
    out: List[Letter] = []
    for i, s in letters:
        if out and out[-1][0] == i and out[-1][1] == -s:
            out.pop()
        else:
            out.append((i, s))
    return tuple(out)


@dataclass(frozen=True)
class BraidWord:
    """
    Word in the Artin generators of the n-strand braid group.
    `labels[p]`, when present, names the configuration point whose strand starts at position p (1-based).
    """
    n: int
    letters: Tuple[Letter, ...] = ()
    labels: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"Strand count must be positive, got {self.n}")
        letters = tuple((int(i), int(s)) for i, s in self.letters)
        for i, s in letters:
            if not 1 <= i <= self.n - 1 or s not in (1, -1):
                raise ValueError(f"Letter ({i}, {s}) is not a generator of B_{self.n}")
        object.__setattr__(self, "letters", letters)
        if self.labels is not None:
            labels = tuple(int(v) for v in self.labels)
            if sorted(labels) != list(range(1, self.n + 1)):
                raise ValueError(f"Labels {labels} are not a permutation of 1..{self.n}")
            object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.letters)

    def __str__(self):
        return format_braid(self)

    @property
    def strand_labels(self) -> Tuple[int, ...]:
        return self.labels if self.labels is not None else tuple(range(1, self.n + 1))

    def end_labels(self) -> Tuple[int, ...]:
        perm = permutation(self)
        out = [0] * self.n
        for start, label in enumerate(self.strand_labels):
            out[perm[start] - 1] = label
        return tuple(out)

    def reduced(self) -> "BraidWord":
        return BraidWord(self.n, free_reduce(self.letters), self.labels)

    def power(self, k: int) -> "BraidWord":
        if k < 0:
            return braid_inverse(self).power(-k)
        return BraidWord(self.n, free_reduce(self.letters * k), self.labels)

    def to_dict(self) -> Dict:
        return {"n": self.n, "letters": [list(x) for x in self.letters],
                "labels": list(self.labels) if self.labels is not None else None}


def reduce(w: BraidWord) -> BraidWord:
    return w.reduced()


def permutation(w: BraidWord) -> Tuple[int, ...]:
    """perm[p] = end position (1-based) of the strand starting at position p + 1"""
    order = list(range(w.n))
    for i, _ in w.letters:
        order[i - 1], order[i] = order[i], order[i - 1]
    perm = [0] * w.n
    for pos, start in enumerate(order):
        perm[start] = pos + 1
    return tuple(perm)


def is_pure(w: BraidWord) -> bool:
    return permutation(w) == tuple(range(1, w.n + 1))


def braid_compose(a: BraidWord, b: BraidWord) -> BraidWord:
    """Word of a o b (b first), freely reduced"""
    if a.n != b.n:
        raise StrandMismatch(f"Cannot compose braids on {a.n} and {b.n} strands")
    labels = b.labels
    if a.labels is not None and b.labels is not None:
        if b.end_labels() != a.labels:
            raise StrandMismatch(f"Strand labels {b.end_labels()} do not continue as {a.labels}")
    elif labels is None and a.labels is not None:
        inverse_perm = {end: start for start, end in enumerate(permutation(b), start=1)}
        labels = tuple(a.labels[inverse_perm[p] - 1] for p in range(1, b.n + 1))
    return BraidWord(a.n, free_reduce(b.letters + a.letters), labels)


def braid_inverse(a: BraidWord) -> BraidWord:
    letters = tuple((i, -s) for i, s in reversed(a.letters))
    labels = a.end_labels() if a.labels is not None else None
    return BraidWord(a.n, free_reduce(letters), labels)


def crossing_counts(w: BraidWord) -> Dict[Tuple[int, int], int]:
    """Signed crossing count per unordered label pair (i < j)"""
    order = list(w.strand_labels)
    counts: Dict[Tuple[int, int], int] = {}
    for i, s in w.letters:
        a, b = order[i - 1], order[i]
        key = (min(a, b), max(a, b))
        counts[key] = counts.get(key, 0) + s
        order[i - 1], order[i] = b, a
    return counts


def pure_generator_word(n: int, i: int, j: int) -> BraidWord:
    """A_ij = s_{j-1} ... s_{i+1} s_i^2 s_{i+1}^-1 ... s_{j-1}^-1 for 1 <= i < j <= n"""
    if not 1 <= i < j <= n:
        raise ValueError(f"Need 1 <= i < j <= {n}, got ({i}, {j})")
    up = [(k, 1) for k in range(j - 1, i, -1)]
    down = [(k, -1) for k in range(i + 1, j)]
    return BraidWord(n, tuple(up) + ((i, 1), (i, 1)) + tuple(down))


def format_braid(w: BraidWord) -> str:
    return " ".join(f"s{i}" if s == 1 else f"s{i}^-1" for i, s in w.letters)


def parse_braid(text: str, n: Optional[int] = None) -> BraidWord:
    """Parse the compact text form 's1 s2^-1 s3'; n defaults to the largest index + 1"""
    if not isinstance(text, str):
        raise ParseError(f"Expected a braid string, got {type(text).__name__}")
    letters = []
    for token in text.replace(",", " ").split():
        match = _TOKEN.match(token)
        if not match:
            raise ParseError(f"Malformed braid letter '{token}'")
        index = int(match.group(1))
        if index < 1:
            raise ParseError(f"Generator index must be >= 1 in '{token}'")
        letters.append((index, -1 if match.group(2) == "-1" else 1))
    return _build(letters, n)


def format_braid_json(w: BraidWord) -> str:
    return json.dumps([list(x) for x in w.letters])


def parse_braid_json(text: str, n: Optional[int] = None) -> BraidWord:
    """Parse a JSON array of [index, sign] pairs (or an object with n, letters and labels)"""
    try:
        data = json.loads(text)
    except (TypeError, ValueError) as e:
        raise ParseError(f"Invalid braid JSON: {e}") from e
    labels = None
    if isinstance(data, dict):
        n = data.get("n", n)
        labels = data.get("labels")
        data = data.get("letters", [])
    if not isinstance(data, list):
        raise ParseError("Braid JSON must be an array of [index, sign] pairs")
    letters = []
    for item in data:
        if (not isinstance(item, list) or len(item) != 2 or not all(isinstance(v, int) for v in item)
                or item[0] < 1 or item[1] not in (1, -1)):
            raise ParseError(f"Malformed braid letter {item!r}")
        letters.append((item[0], item[1]))
    return _build(letters, n, labels)


def _build(letters, n, labels=None) -> BraidWord:
    needed = max((i for i, _ in letters), default=0) + 1
    if n is None:
        n = max(needed, 2)
    if n < needed:
        raise ParseError(f"Generator s{needed - 1} does not exist on {n} strands")
    try:
        return BraidWord(n, tuple(letters), labels)
    except ValueError as e:
        raise ParseError(str(e)) from e


@dataclass(frozen=True)
class CrossingEvent:
    time: float
    position: int
    strands: Tuple[int, int]
    sign: int


@dataclass(frozen=True)
class StrandDiagram:
    """Projected strands, shape (m, n, 2), with their crossing events in time order"""
    times: np.ndarray
    planar: np.ndarray
    crossings: Tuple[CrossingEvent, ...] = field(default=())

    @property
    def n(self) -> int:
        return self.planar.shape[1]


def _pair_events(times, planar, a, b):
    """Crossings of strands a and b in first planar coordinate, as (time, second-coordinate gap a-b, slope)"""
    d = planar[:, a, 0] - planar[:, b, 0]
    if np.any(d[1:] == 0.0):
        raise TangentialCrossing(f"Strands {a + 1} and {b + 1} touch in projection")
    flips = np.nonzero(np.sign(d[:-1]) * np.sign(d[1:]) < 0)[0]
    events = []
    for k in flips:
        d0, d1 = d[k], d[k + 1]
        w = d0 / (d0 - d1)
        t = times[k] + w * (times[k + 1] - times[k])
        ga = (1 - w) * planar[k, a, 1] + w * planar[k + 1, a, 1]
        gb = (1 - w) * planar[k, b, 1] + w * planar[k + 1, b, 1]
        events.append((t, ga - gb, abs(d1 - d0)))
    return events


def braid_from_strands(planar, times=None, labels: Optional[Sequence[int]] = None) -> Tuple[BraidWord, StrandDiagram]:
    """
    Read the braid traced by planar strands (shape (m, n, 2)), open or closed.
    Strands are ordered by first coordinate, ties broken by the second.
    """
    planar = np.asarray(planar, dtype=float)
    m, n, _ = planar.shape
    times = np.arange(m, dtype=float) if times is None else np.asarray(times, dtype=float)
    labels = tuple(range(1, n + 1)) if labels is None else tuple(labels)

    events = []
    for a in range(n):
        for b in range(a + 1, n):
            for t, gap, slope in _pair_events(times, planar, a, b):
                if slope < TRANSVERSALITY_TOLERANCE or abs(gap) < SEPARATION_TOLERANCE:
                    raise TangentialCrossing(
                        f"Crossing of strands {labels[a]} and {labels[b]} at t={t:.6g} is not transverse"
                    )
                events.append((t, a, b, gap))
    events.sort(key=lambda e: e[0])

    start = planar[0]
    initial = sorted(range(n), key=lambda s: (start[s, 0], start[s, 1]))
    order = list(initial)
    position = {s: p for p, s in enumerate(order)}
    letters = []
    crossings = []
    for t, a, b, gap in events:
        pa, pb = position[a], position[b]
        if abs(pa - pb) != 1:
            raise TangentialCrossing(
                f"Strands {labels[a]} and {labels[b]} swap at t={t:.6g} while not adjacent"
            )
        left, right = (a, b) if pa < pb else (b, a)
        left_gap = gap if left == a else -gap
        sign = 1 if left_gap < 0 else -1
        index = min(pa, pb) + 1
        letters.append((index, sign))
        crossings.append(CrossingEvent(float(t), index, (labels[left], labels[right]), sign))
        order[pa], order[pb] = order[pb], order[pa]
        position[a], position[b] = pb, pa

    word = BraidWord(n, free_reduce(letters), tuple(labels[s] for s in initial))
    return word, StrandDiagram(times, planar, tuple(crossings))


def loop_paths(iso, x: np.ndarray, z: np.ndarray, tail_samples: int = TAIL_SAMPLES) -> np.ndarray:
    """
    Sphere paths of the loops: geodesic z -> x, the flow of x, geodesic f(x) -> z.
    x and z have shape (..., n, 3); the result has shape (m, ..., n, 3).
    """
    head = geodesic_samples(z, x, tail_samples)
    flow = iso.integrate(x).points
    tail = geodesic_samples(flow[-1], z, tail_samples)
    return np.concatenate([head, flow[1:], tail[1:]], axis=0)


def word_from_path(path: np.ndarray, projection_pole=DEFAULT_PROJECTION_POLE) -> BraidWord:
    """Braid word of one closed path of configurations, shape (m, n, 3)"""
    pole = normalize(as_vector(projection_pole))
    closest = float(np.max(path @ pole))
    if closest > np.cos(POLE_CLEARANCE):
        raise PoleCollision(f"A strand passes within {POLE_CLEARANCE} rad of the projection pole")
    word, _ = braid_from_strands(project_array(path, pole))
    return word


def _as_points(c) -> np.ndarray:
    return c.points if isinstance(c, Configuration) else np.asarray(c, dtype=float)


def extract_braid(iso, x, z, projection_pole=DEFAULT_PROJECTION_POLE, tail_samples: int = TAIL_SAMPLES) -> BraidWord:
    """Braid of the loops z -> x -> f(x) -> z, one per configuration point"""
    xp, zp = _as_points(x), _as_points(z)
    if xp.shape != zp.shape:
        raise StrandMismatch(f"Configurations have {len(xp)} and {len(zp)} points")
    return word_from_path(loop_paths(iso, xp, zp, tail_samples), projection_pole)


def jitter_configuration(z: np.ndarray, rng: np.random.Generator, size: float = RETRY_JITTER) -> np.ndarray:
    """Move every point by `size` radians in a random tangent direction"""
    v = rng.standard_normal(z.shape)
    v -= np.sum(v * z, axis=-1, keepdims=True) * z
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    return normalize(np.cos(size) * z + np.sin(size) * v)


def extract_braid_with_retry(iso, x, z, projection_pole=DEFAULT_PROJECTION_POLE, seed: int = 0,
                             retries: int = MAX_RETRIES) -> BraidWord:
    """
    extract_braid, retrying after a tangential crossing with both the base configuration
    and the configuration itself jittered by RETRY_JITTER. Moving x as well breaks
    degeneracies that live on the flow segment, such as strands mirrored across the
    equator whose projections keep the same first coordinate.
    """
    xp, zp = _as_points(x), _as_points(z)
    rng = make_rng(seed, 7919)
    for attempt in range(retries + 1):
        try:
            if attempt == 0:
                return extract_braid(iso, xp, zp, projection_pole)
            return extract_braid(iso, jitter_configuration(xp, rng), jitter_configuration(zp, rng), projection_pole)
        except TangentialCrossing:
            if attempt == retries:
                raise
            logger.debug("Tangential crossing, retrying with jittered configurations (attempt %d)", attempt + 1)


def braid_invariants(w: BraidWord) -> Dict:
    """Invariant table: permutation, exponent sum, all lk_ij (by label) and closure signature"""
    from core.signature import goeritz_signature

    counts = crossing_counts(w)
    table = {
        "permutation": list(permutation(w)),
        "exponent_sum": sum(s for _, s in w.letters),
    }
    for i in range(1, w.n + 1):
        for j in range(i + 1, w.n + 1):
            table[f"lk_{i}_{j}"] = counts.get((i, j), 0) / 2.0
    table["signature"] = goeritz_signature(w)
    return table


@dataclass
class CocycleReport:
    direct: BraidWord
    composed: BraidWord
    direct_invariants: Dict
    composed_invariants: Dict
    mismatches: List[str]

    @property
    def agree(self) -> bool:
        return not self.mismatches


def cocycle_check(f, g, x, z, projection_pole=DEFAULT_PROJECTION_POLE) -> CocycleReport:
    """Compare the braid of gf with the product of the braids of g (from f(x)) and f (from x)"""
    from core.flows import compose

    xp, zp = _as_points(x), _as_points(z)
    direct = extract_braid(compose(g, f), xp, zp, projection_pole)
    fx = f.time_one_map(xp)
    composed = braid_compose(extract_braid(g, fx, zp, projection_pole), extract_braid(f, xp, zp, projection_pole))
    left, right = braid_invariants(direct), braid_invariants(composed)
    mismatches = [key for key in left if left[key] != right.get(key)]
    if mismatches:
        logger.warning("Cocycle mismatch on %s", ", ".join(mismatches))
    return CocycleReport(direct, composed, left, right, mismatches)

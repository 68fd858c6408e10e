"""
Quasimorphism plug-ins evaluated on braid words.

Each plug-in is a picklable value (evaluators are module-level classes) so it can
travel to worker processes. The manifest of a plug-in is embedded in every report.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from core.braids import BraidWord, braid_compose, braid_inverse, crossing_counts, pure_generator_word
from core.errors import ConfigInvalid
from core.signature import goeritz_signature

logger = logging.getLogger(__name__)

CALIBRATION_FACTOR = 1.25
CALIBRATION_TRIALS = 500
CALIBRATION_WORD_LENGTH = 20

Pair = Tuple[int, int]


def exponent_sum(w: BraidWord) -> int:
    return sum(s for _, s in w.letters)


def linking_number(w: BraidWord, i: int, j: int) -> float:
    """Half the signed crossing count between the strands labelled i and j"""
    if not 1 <= i < j <= w.n:
        raise ValueError(f"Need 1 <= i < j <= {w.n}, got ({i}, {j})")
    return crossing_counts(w).get((i, j), 0) / 2.0


class ExponentSumEvaluator:
    def __call__(self, w: BraidWord) -> float:
        return float(exponent_sum(w))


@dataclass(frozen=True)
class CrossLinkingEvaluator:
    weights: Tuple[Tuple[Pair, float], ...]

    def __call__(self, w: BraidWord) -> float:
        counts = crossing_counts(w)
        return float(sum(weight * counts.get(pair, 0) for pair, weight in self.weights)) / 2.0


class SignatureEvaluator:
    def __call__(self, w: BraidWord) -> float:
        return float(goeritz_signature(w))


@dataclass(frozen=True)
class Quasimorphism:
    name: str
    evaluate: Callable[[BraidWord], float]
    declared_defect: float = 0.0
    homogeneous: bool = True
    vanishes_on_split: bool = False
    parameters: Dict[str, Any] = field(default_factory=dict)

    def __call__(self, w: BraidWord) -> float:
        return self.evaluate(w)

    def manifest(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "declared_defect": self.declared_defect,
            "homogeneous": self.homogeneous,
            "vanishes_on_split": self.vanishes_on_split,
            "parameters": dict(self.parameters),
        }


def exponent_sum_qm() -> Quasimorphism:
    return Quasimorphism("exponent-sum", ExponentSumEvaluator(), 0.0, True, False)


def cross_linking_qm(weights: Dict[Pair, float], block_size: Optional[int] = None) -> Quasimorphism:
    """
    phi(w) = sum_{i<j} w_ij lk_ij(w), a homomorphism on pure braids.
    With `block_size` = number of leading labels in the northern block, the plug-in
    is certified to vanish on split braids when every weight pairs the two blocks.
    """
    clean = []
    for (i, j), weight in sorted(weights.items()):
        if not math.isfinite(weight):
            raise ValueError(f"Weight for pair ({i}, {j}) is not finite")
        if i == j:
            raise ValueError(f"Pair ({i}, {j}) does not name two strands")
        if weight != 0.0:
            clean.append(((min(i, j), max(i, j)), float(weight)))
    crossing = block_size is not None and all(i <= block_size < j for (i, j), _ in clean)
    params = {"weights": {f"{i}-{j}": wt for (i, j), wt in clean}, "block_size": block_size}
    return Quasimorphism("cross-linking", CrossLinkingEvaluator(tuple(clean)), 0.0, True, crossing, params)


def default_cross_weights(n: int) -> Dict[Pair, float]:
    """Unit weight on every pair joining labels 1..n//2 to the rest"""
    half = n // 2
    return {(i, j): 1.0 for i in range(1, half + 1) for j in range(half + 1, n + 1)}


def signature_qm(declared_defect: float = 4.0) -> Quasimorphism:
    """Closure signature; the declared defect is a calibrated value (see calibrate_defect)"""
    if not declared_defect >= 0.0:
        raise ValueError(f"Declared defect must be >= 0, got {declared_defect}")
    return Quasimorphism("signature", SignatureEvaluator(), float(declared_defect), False, False,
                         {"route": "goeritz"})


def build_quasimorphism(name: str, n: int, params: Optional[Dict[str, Any]] = None) -> Quasimorphism:
    params = dict(params or {})
    if name == "exponent-sum":
        return exponent_sum_qm()
    if name == "cross-linking":
        raw = params.get("weights")
        if raw is None:
            weights = default_cross_weights(n)
        else:
            weights = {}
            for key, value in raw.items():
                i, j = (int(v) for v in str(key).split("-"))
                weights[(i, j)] = float(value)
        return cross_linking_qm(weights, params.get("block_size", n // 2))
    if name == "signature":
        if "declared_defect" in params:
            return signature_qm(float(params["declared_defect"]))
        rng = np.random.default_rng(int(params.get("calibration_seed", 0)))
        qm, _ = calibrate_defect(signature_qm(), rng, int(params.get("calibration_trials", CALIBRATION_TRIALS)),
                                 CALIBRATION_WORD_LENGTH, max(n, 2))
        return qm
    raise ConfigInvalid(f"Unknown quasimorphism '{name}'", {"known": sorted(QUASIMORPHISM_NAMES)})


QUASIMORPHISM_NAMES = ("exponent-sum", "cross-linking", "signature")


@dataclass
class HomogenizationEstimate:
    value: float
    k_max: int
    per_k: List[float]
    converged: bool


def homogenize(qm: Quasimorphism, w: BraidWord, k_max: int = 10, tol: float = 1e-9) -> HomogenizationEstimate:
    """phi(w^k)/k for k = 1..k_max; converged when the last two ratios differ by less than tol"""
    if k_max < 2:
        raise ValueError(f"k_max must be >= 2, got {k_max}")
    per_k = [qm(w.power(k)) / k for k in range(1, k_max + 1)]
    converged = abs(per_k[-1] - per_k[-2]) < tol
    return HomogenizationEstimate(per_k[-1], k_max, per_k, converged)


def random_word(rng: np.random.Generator, n: int, length: int) -> BraidWord:
    indices = rng.integers(1, n, size=length)
    signs = rng.choice([-1, 1], size=length)
    return BraidWord(n, tuple(zip(indices.tolist(), signs.tolist())))


def random_pure_word(rng: np.random.Generator, n: int, length: int) -> BraidWord:
    """Product of `length` random pure generators A_ij^(+-1)"""
    letters = []
    for _ in range(length):
        i, j = sorted(rng.choice(np.arange(1, n + 1), size=2, replace=False).tolist())
        g = pure_generator_word(n, i, j)
        letters.extend(g.letters if rng.random() < 0.5 else braid_inverse(g).letters)
    return BraidWord(n, tuple(letters))


def defect_estimate(qm: Quasimorphism, rng: np.random.Generator, trials: int = 1000,
                    word_length: int = 20, n: int = 4, pure: bool = False) -> float:
    """
    max |phi(ab) - phi(a) - phi(b)| over random word pairs; a lower bound on the defect.
    General words by default; `pure` restricts to products of pure generators.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    sample = random_pure_word if pure else random_word
    worst = 0.0
    for _ in range(trials):
        a, b = sample(rng, n, word_length), sample(rng, n, word_length)
        worst = max(worst, abs(qm(braid_compose(a, b)) - qm(a) - qm(b)))
    return worst


def calibrate_defect(qm: Quasimorphism, rng: np.random.Generator, trials: int = 10_000,
                     word_length: int = 20, n: int = 4) -> Tuple[Quasimorphism, float]:
    """Freeze declared_defect at 1.25 x the largest defect sampled on general words; returns (plug-in, observed)"""
    observed = defect_estimate(qm, rng, trials, word_length, n)
    declared = CALIBRATION_FACTOR * observed
    params = dict(qm.parameters, calibration={"trials": trials, "word_length": word_length,
                                              "n": n, "observed": observed, "words": "general"})
    logger.info("Calibrated %s defect: observed=%s declared=%s", qm.name, observed, declared)
    return replace(qm, declared_defect=declared, parameters=params), observed


def inversion_defect(qm: Quasimorphism, rng: np.random.Generator, trials: int = 1000,
                     word_length: int = 20, n: int = 4) -> float:
    """max |phi(a^-1) + phi(a)| over random pure words"""
    worst = 0.0
    for _ in range(trials):
        a = random_pure_word(rng, n, word_length)
        worst = max(worst, abs(qm(braid_inverse(a)) + qm(a)))
    return worst


def conjugation_defect(qm: Quasimorphism, rng: np.random.Generator, trials: int = 1000,
                       word_length: int = 20, n: int = 4) -> float:
    """max |phi(b a b^-1) - phi(a)| over random pure words a and b"""
    worst = 0.0
    for _ in range(trials):
        a = random_pure_word(rng, n, word_length)
        b = random_pure_word(rng, n, word_length)
        conj = braid_compose(b, braid_compose(a, braid_inverse(b)))
        worst = max(worst, abs(qm(conj) - qm(a)))
    return worst

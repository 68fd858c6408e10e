"""
Stratified Monte Carlo estimator of Phi_n.

Phi_n(f) = sum_{k=2}^{n-2} vol(X_{n,k}) * E[phi(gamma(f, x)) | exactly k points in D+].
Work is cut into shards of one stratum and one fixed-size sample block. Every
shard draws from its own counter-based generator keyed by (seed, k, block), and
results are concatenated in block order, so estimates are bit-identical for any
worker count.
"""

import logging
import math
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Dict, List, Sequence, Tuple

import numpy as np

from core.braids import (
    DEFAULT_PROJECTION_POLE, extract_braid, extract_braid_with_retry, loop_paths, word_from_path,
)
from core.errors import EXTRACTION_ERRORS, ConfigInvalid, NumericalFailure, TangentialCrossing
from core.flows import Isotopy, compose
from core.quasimorphisms import Quasimorphism
from core.sphere_geometry import (
    as_vector, base_configuration, make_rng, sample_stratum_configuration, stratum_volume,
)
from utils.logger import log_fields

logger = logging.getLogger(__name__)

BLOCK_SIZE = 256
MIN_PER_STRATUM = 10
MAX_FAILURE_RATE = 0.01
AREA_PLUS = 0.5


@dataclass
class ParamorphismEstimate:
    mean: float
    stderr: float
    samples_per_stratum: Dict[int, int]
    stratum_means: Dict[int, float]
    stratum_stderrs: Dict[int, float]
    n: int
    qm_name: str
    seed: int
    failures: int = 0
    values: Dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def weights(self) -> Dict[int, float]:
        return {k: stratum_volume(self.n, k, AREA_PLUS) for k in self.stratum_means}

    def recombination_error(self) -> float:
        total = sum(self.weights[k] * m for k, m in self.stratum_means.items())
        return abs(total - self.mean)

    def to_dict(self) -> Dict:
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "n": self.n,
            "qm": self.qm_name,
            "seed": self.seed,
            "failures": self.failures,
            "samples_per_stratum": {str(k): v for k, v in self.samples_per_stratum.items()},
            "stratum_means": {str(k): v for k, v in self.stratum_means.items()},
            "stratum_stderrs": {str(k): v for k, v in self.stratum_stderrs.items()},
        }


def strata(n: int) -> List[int]:
    return list(range(2, n - 1))


def allocate_samples(n: int, samples: int) -> Dict[int, int]:
    """Proportional allocation over strata k = 2..n-2, at least MIN_PER_STRATUM each"""
    ks = strata(n)
    weights = np.array([stratum_volume(n, k, AREA_PLUS) for k in ks])
    shares = weights / weights.sum()
    return {k: max(MIN_PER_STRATUM, int(round(samples * s))) for k, s in zip(ks, shares)}


def _sample_block(n: int, k: int, seed: int, block: int, count: int) -> np.ndarray:
    rng = make_rng(seed, k, block)
    return np.stack([sample_stratum_configuration(rng, n, k).points for _ in range(count)])


def _extract_one(iso, x, z, pole, seed) -> object:
    try:
        return extract_braid(iso, x, z, pole)
    except TangentialCrossing:
        return extract_braid_with_retry(iso, x, z, pole, seed=seed)


def _shard_values(task) -> Tuple[int, int, np.ndarray]:
    """Evaluate phi on one block; failed extractions become NaN"""
    iso, qm, n, k, block, count, seed, pole = task
    X = _sample_block(n, k, seed, block, count)
    z = base_configuration(n, k).points
    values = np.full(count, np.nan)
    try:
        paths = loop_paths(iso, X, np.broadcast_to(z, X.shape))
    except EXTRACTION_ERRORS:
        paths = None
    for s in range(count):
        try:
            if paths is not None:
                try:
                    word = word_from_path(paths[:, s], pole)
                except TangentialCrossing:
                    word = extract_braid_with_retry(iso, X[s], z, pole, seed=seed * 1_000_003 + block * 4096 + s)
            else:
                word = _extract_one(iso, X[s], z, pole, seed)
            values[s] = qm(word)
        except EXTRACTION_ERRORS as e:
            logger.debug("Sample failed: %s %s", type(e).__name__, log_fields(k=k, block=block, sample=s))
    return k, block, values


def _run_tasks(tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [_shard_values(t) for t in tasks]
    with Pool(processes=workers) as pool:
        return pool.map(_shard_values, tasks, chunksize=1)


def sample_values(f: Isotopy, qm: Quasimorphism, n: int, samples: int, seed: int, workers: int = 1,
                  projection_pole=DEFAULT_PROJECTION_POLE, block_size: int = BLOCK_SIZE) -> Dict[int, np.ndarray]:
    """Per-sample values of phi(gamma(f, x)) by stratum, NaN where extraction failed"""
    pole = as_vector(projection_pole)
    allocation = allocate_samples(n, samples)
    tasks = []
    for k, total in allocation.items():
        for block in range(math.ceil(total / block_size)):
            count = min(block_size, total - block * block_size)
            tasks.append((f, qm, n, k, block, count, seed, pole))
    by_k: Dict[int, List[Tuple[int, np.ndarray]]] = {k: [] for k in allocation}
    for k, block, values in _run_tasks(tasks, workers):
        by_k[k].append((block, values))
    return {k: np.concatenate([v for _, v in sorted(parts, key=lambda p: p[0])]) for k, parts in by_k.items()}


def summarize(values: Dict[int, np.ndarray], n: int, qm_name: str, seed: int,
              max_failure_rate: float = MAX_FAILURE_RATE) -> ParamorphismEstimate:
    """Stratified mean and delta-method stderr from per-sample values"""
    total = sum(len(v) for v in values.values())
    failures = int(sum(np.isnan(v).sum() for v in values.values()))
    if total and failures / total > max_failure_rate:
        raise NumericalFailure(
            f"{failures} of {total} samples failed extraction",
            {"failures": failures, "samples": total, "limit": max_failure_rate},
        )
    means, stderrs, counts = {}, {}, {}
    mean = 0.0
    variance = 0.0
    for k in sorted(values):
        good = values[k][~np.isnan(values[k])]
        w = stratum_volume(n, k, AREA_PLUS)
        counts[k] = int(len(good))
        means[k] = float(np.mean(good)) if len(good) else 0.0
        s2 = float(np.var(good, ddof=1)) if len(good) > 1 else 0.0
        stderrs[k] = math.sqrt(s2 / max(len(good), 1))
        mean += w * means[k]
        variance += w * w * s2 / max(len(good), 1)
    return ParamorphismEstimate(mean, math.sqrt(variance), counts, means, stderrs, n, qm_name, seed, failures, values)


def _check(n: int, samples: int):
    if n <= 3:
        raise ConfigInvalid(f"n > 3 is required, got n={n}")
    if samples < MIN_PER_STRATUM:
        raise ConfigInvalid(f"At least {MIN_PER_STRATUM} samples are required, got {samples}")


def phi_estimate(f: Isotopy, qm: Quasimorphism, n: int, samples: int, seed: int, workers: int = 1,
                 projection_pole=DEFAULT_PROJECTION_POLE) -> ParamorphismEstimate:
    _check(n, samples)
    values = sample_values(f, qm, n, samples, seed, workers, projection_pole)
    estimate = summarize(values, n, qm.name, seed)
    logger.info("Phi estimate %s", log_fields(mean=f"{estimate.mean:.6g}", stderr=f"{estimate.stderr:.3g}",
                                               n=n, qm=qm.name, seed=seed, samples=samples,
                                               failures=estimate.failures))
    return estimate


def additivity_defect_estimate(f: Isotopy, g: Isotopy, qm: Quasimorphism, n: int, samples: int, seed: int,
                               workers: int = 1, projection_pole=DEFAULT_PROJECTION_POLE) -> ParamorphismEstimate:
    """Phi(gf) - Phi(f) - Phi(g) from paired per-sample differences (common configurations)"""
    _check(n, samples)
    gf = sample_values(compose(g, f), qm, n, samples, seed, workers, projection_pole)
    vf = sample_values(f, qm, n, samples, seed, workers, projection_pole)
    vg = sample_values(g, qm, n, samples, seed, workers, projection_pole)
    diff = {k: gf[k] - vf[k] - vg[k] for k in gf}
    return summarize(diff, n, qm.name, seed)


@dataclass
class AntisymmetryResult:
    forward: ParamorphismEstimate
    backward: ParamorphismEstimate
    z_score: float

    @property
    def passed(self) -> bool:
        return self.z_score <= 3.0


def antisymmetry_check(f: Isotopy, qm: Quasimorphism, n: int, samples: int, seed: int,
                       workers: int = 1) -> AntisymmetryResult:
    """Phi(f^-1) against -Phi(f) in units of the combined stderr"""
    forward = phi_estimate(f, qm, n, samples, seed, workers)
    backward = phi_estimate(f.inverse(), qm, n, samples, seed + 1, workers)
    spread = math.hypot(forward.stderr, backward.stderr)
    gap = abs(forward.mean + backward.mean)
    z = 0.0 if gap == 0.0 else (math.inf if spread == 0.0 else gap / spread)
    return AntisymmetryResult(forward, backward, z)


def determinism_check(f: Isotopy, qm: Quasimorphism, n: int, samples: int, seed: int,
                      worker_counts: Sequence[int] = (1, 2)) -> bool:
    """True when every worker count reproduces the same estimate bit for bit"""
    runs = [phi_estimate(f, qm, n, samples, seed, w) for w in worker_counts]
    first = runs[0]
    return all(r.mean == first.mean and r.stderr == first.stderr and r.stratum_means == first.stratum_means
               for r in runs[1:])

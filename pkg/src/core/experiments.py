"""
Experiment dispatch: turns an ExperimentConfig into PropertyReports.
"""

import logging
import math
from fractions import Fraction
from typing import Any, Dict, List

import numpy as np
from scipy.special import beta

from core.config_manager import ExperimentConfig
from core.errors import IncompleteCoefficients
from core.flows import BoundaryIsotopy, lp_length, rotation
from core.paramorphism import antisymmetry_check, determinism_check
from core.presets import (
    build_flow, equator_preserving_family, ishida_disks, parse_twist_pattern, random_flow_family,
)
from core.property_suites import (
    IshidaSpec, PropertyReport, cocycle_report, collar_scaling_report, d1_lower_bound_report, displacement_report,
    homogeneity_ratio, ishida_polynomial_prediction, ishida_scaling_report, measure_ishida_coefficients,
    phi_bar_estimate, property1_scan, property3_check, property4_scan,
)
from core.quasimorphisms import Quasimorphism, build_quasimorphism
from core.sphere_geometry import Disk, SpherePoint, make_rng, uniform_points
from utils.logger import log_fields

logger = logging.getLogger(__name__)

LENGTH_TOLERANCE = 1e-3  # relative, against the closed-form rotation length

# Growth expectation of the P2 slope per flow preset; None reports without gating
GROWTH_EXPECTATION = {"eggbeater": True, "rotation": False, "identity": False, "collar": False,
                      "hemisphere-twist": False, "split-twist": False}


def _flow(config: ExperimentConfig, name: str = None, params: Dict[str, Any] = None):
    return build_flow(name or config.flow, config.flow_params if params is None else params, config.step_size)


def run_p2(config: ExperimentConfig, qm: Quasimorphism) -> List[PropertyReport]:
    expect = config.flow_params.get("expect_growth", GROWTH_EXPECTATION.get(config.flow))
    params = {k: v for k, v in config.flow_params.items() if k != "expect_growth"}
    f = _flow(config, params=params)
    return [phi_bar_estimate(f, qm, config.n, config.k_range, config.samples, config.seed, config.workers,
                             expect_growth=expect)]


def run_p1(config: ExperimentConfig, qm: Quasimorphism) -> List[PropertyReport]:
    f = _flow(config)
    angles = np.geomspace(0.2, 2.0, int(config.flow_params.get("pairs", 10)))
    axis = config.flow_params.get("g_axis", "x")
    pairs = [(f, build_flow("rotation", {"axis": axis, "angle": float(a)}, config.step_size)) for a in angles]
    return [property1_scan(pairs, qm, config.n, config.samples, config.seed, config.workers)]


def run_p3(config: ExperimentConfig, qm: Quasimorphism) -> List[PropertyReport]:
    family, params = equator_preserving_family(step_size=config.step_size)
    egg_params = config.flow_params if config.flow == "eggbeater" else {}
    eggbeater = build_flow("eggbeater", egg_params, config.step_size)
    return [property3_check(family, qm, config.n, config.samples, config.seed, config.workers,
                            parameters=params, eggbeater=eggbeater)]


def run_p4(config: ExperimentConfig, qm: Quasimorphism) -> List[PropertyReport]:
    flows = random_flow_family(int(config.flow_params.get("count", 20)), config.seed, config.step_size)
    return [property4_scan(flows, qm, config.n, config.samples, config.seed, config.workers)]


def rotation_lp_length(angle: float, p_exponent: float = 1.0) -> float:
    """Closed form |angle| (2 pi int_0^pi sin^(p+1))^(1/p) of a rigid rotation; pi^2 |angle| for p = 1"""
    return abs(angle) * (2.0 * math.pi * beta(0.5, 0.5 * p_exponent + 1.0)) ** (1.0 / p_exponent)


def run_length(config: ExperimentConfig, qm: Quasimorphism) -> List[PropertyReport]:
    f = _flow(config)
    exponent = float(config.flow_params.get("p", 1.0))
    length = lp_length(f, exponent)
    constants = {"length": length, "p": exponent}
    passed = True
    if config.flow == "rotation":
        expected = rotation_lp_length(float(config.flow_params.get("angle", 1.0)), exponent)
        error = abs(length - expected) / expected if expected else abs(length)
        constants.update(expected=expected, relative_error=error)
        passed = error <= LENGTH_TOLERANCE
    point = {"k_or_index": 0, "value": length, "stderr": 0.0, "samples": 0, "seed": None}
    return [PropertyReport("Length", constants, [point], passed, empirical=False)]


def run_frag(config: ExperimentConfig, qm: Quasimorphism) -> List[PropertyReport]:
    params = config.flow_params
    boundary = BoundaryIsotopy(float(params.get("rate", 1.0)),
                               tuple((int(m), float(a)) for m, a in params.get("modes", [])))
    deltas = tuple(float(d) for d in params.get("deltas", (0.2, 0.1, 0.05, 0.025)))
    return [collar_scaling_report(boundary, deltas)]


def run_nondeg(config: ExperimentConfig, qm: Quasimorphism) -> List[PropertyReport]:
    params = config.flow_params
    if config.flow == "rotation":
        f = _flow(config)
    else:
        f = rotation(SpherePoint(1.0, 0.0, 0.0), math.pi, config.step_size)
    disk = Disk.from_area(SpherePoint(0.0, 0.0, 1.0), float(params.get("cap_area", 0.05)))
    return [displacement_report(f, disk)]


def run_cocycle(config: ExperimentConfig, qm: Quasimorphism) -> List[PropertyReport]:
    rng = make_rng(config.seed, 2718)
    axes = uniform_points(rng, 4)
    angles = rng.uniform(0.3, 3.0, 4)
    rotations = [rotation(SpherePoint.from_vector(a), float(t), config.step_size) for a, t in zip(axes, angles)]
    eggbeater = build_flow("eggbeater", config.flow_params if config.flow == "eggbeater" else {}, config.step_size)
    pairs = [(rotations[0], rotations[1]), (rotations[2], rotations[3]), (eggbeater, rotations[0])]
    trials = int(config.flow_params.get("trials", 50))
    return [cocycle_report(pairs, config.n, trials, config.seed)]


def run_ishida(config: ExperimentConfig, qm: Quasimorphism) -> List[PropertyReport]:
    params = config.flow_params if config.flow == "eggbeater" else {}
    disks = ishida_disks(params)
    target = parse_twist_pattern(params.get("pattern", "A13"))
    qm4 = build_quasimorphism(config.qm, 4, config.qm_params)
    measured = measure_ishida_coefficients(disks, target, qm4, seed=config.seed)
    missing = [k for k, v in measured.coefficients.items() if v is None]
    if measured.b is None or missing:
        raise IncompleteCoefficients("Some Ishida coefficients could not be measured", {"missing": missing})
    exact = IshidaSpec(tuple(Fraction(a) for a in measured.areas), Fraction(measured.b),
                       {k: Fraction(v) for k, v in measured.coefficients.items()})
    prediction = ishida_polynomial_prediction(exact)
    ratio = homogeneity_ratio(exact)
    constants = {"prediction": float(prediction), "b": measured.b,
                 "homogeneity_ratio": None if ratio is None else float(ratio)}
    constants.update({f"c{k}": v for k, v in measured.coefficients.items()})
    passed = ratio is None or ratio == 16
    point = {"k_or_index": 1, "value": float(prediction), "stderr": 0.0, "samples": 0, "seed": config.seed}
    scaling = ishida_scaling_report(
        disks, target, qm4,
        r_values=tuple(float(r) for r in params.get("r_values", (0.5, 1.0, 2.0))),
        samples=int(params.get("disk_samples", 48)), seed=config.seed,
    )
    return [PropertyReport("Ishida", constants, [point], passed, empirical=False), scaling]


def run_d1(config: ExperimentConfig, qm: Quasimorphism) -> List[PropertyReport]:
    f = _flow(config)
    sequence = [f.iterate(k) for k in config.k_range]
    return [d1_lower_bound_report(sequence, qm, config.n, config.samples, config.seed, config.workers)]


def run_antisymmetry(config: ExperimentConfig, qm: Quasimorphism) -> List[PropertyReport]:
    result = antisymmetry_check(_flow(config), qm, config.n, config.samples, config.seed, config.workers)
    points = [{"k_or_index": 1, "value": result.forward.mean, "stderr": result.forward.stderr,
               "samples": config.samples, "seed": result.forward.seed},
              {"k_or_index": -1, "value": result.backward.mean, "stderr": result.backward.stderr,
               "samples": config.samples, "seed": result.backward.seed}]
    return [PropertyReport("Antisymmetry", {"z_score": result.z_score}, points, result.passed,
                           {"qm": qm.manifest()})]


def run_determinism(config: ExperimentConfig, qm: Quasimorphism) -> List[PropertyReport]:
    counts = (1, max(2, config.workers))
    same = determinism_check(_flow(config), qm, config.n, config.samples, config.seed, counts)
    return [PropertyReport("Determinism", {"worker_counts": list(counts)}, [], same, empirical=False)]


RUNNERS = {
    "p1": run_p1, "p2": run_p2, "p3": run_p3, "p4": run_p4, "length": run_length, "frag": run_frag,
    "nondeg": run_nondeg, "cocycle": run_cocycle, "ishida": run_ishida, "d1": run_d1,
    "antisymmetry": run_antisymmetry, "determinism": run_determinism,
}


def run_experiment(config: ExperimentConfig, qm: Quasimorphism = None):
    """Returns (plug-in, reports); module errors propagate to the caller"""
    if qm is None:
        qm = build_quasimorphism(config.qm, config.n, config.qm_params)
    logger.info("Running experiment %s", log_fields(experiment=config.experiment, flow=config.flow, qm=config.qm,
                                                    n=config.n, samples=config.samples, seed=config.seed,
                                                    workers=config.workers))
    reports = RUNNERS[config.experiment](config, qm)
    return qm, reports

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from core.errors import CollarTooWide, LayoutInfeasible, QuadratureTooCoarse, StepSizeInvalid
from core.flows import (
    BoundaryIsotopy, Isotopy, QuadratureSpec, RadialTwistHamiltonian, RandomFourierHamiltonian, TwistLetter,
    check_ishida_layout, collar_cutoff_isotopy, compose, cutoff_profile, default_ishida_disks, disk_area_check,
    eggbeater_family, equator_displacement, hemisphere_twist, lp_length, random_fourier_isotopy, rotation,
    twist_hamiltonian,
)
from core.presets import random_flow_family
from core.sphere_geometry import Disk, SpherePoint, angle_between, make_rng, tangent_basis, uniform_points

Z = SpherePoint(0.0, 0.0, 1.0)


def test_rotation_turns_counterclockwise_about_axis():
    f = rotation(Z, math.pi / 2)
    assert_allclose(f.time_one_map(np.array([1.0, 0.0, 0.0])), [0.0, 1.0, 0.0], atol=1e-8)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_rotation_is_integrated_exactly(seed):
    rng = make_rng(seed)
    axis = uniform_points(rng, 1)[0]
    angle = float(rng.uniform(-3.0, 3.0))
    pts = uniform_points(rng, 10)
    moved = rotation(SpherePoint.from_vector(axis), angle, step_size=0.1).time_one_map(pts)
    # Rodrigues formula as the reference
    k = axis
    expected = (pts * math.cos(angle) + np.cross(k, pts) * math.sin(angle)
                + np.outer(pts @ k, k) * (1.0 - math.cos(angle)))
    assert_allclose(moved, expected, atol=1e-8)


def test_points_stay_on_sphere():
    f = random_fourier_isotopy(3, 1.0, seed=4)
    pts = f.time_one_map(uniform_points(make_rng(9), 50))
    assert_allclose(np.linalg.norm(pts, axis=1), 1.0, atol=1e-12)


def test_trajectory_samples_every_step():
    traj = rotation(Z, 1.0, step_size=0.1).integrate(np.array([1.0, 0.0, 0.0]))
    assert len(traj.times) == 11
    assert traj.times[-1] == pytest.approx(1.0)
    assert traj.max_step_angle() == pytest.approx(0.1, rel=1e-9)


def test_inverse_undoes_time_dependent_flow():
    f = random_fourier_isotopy(2, 0.8, seed=11)
    pts = uniform_points(make_rng(3), 20)
    back = f.inverse().time_one_map(f.time_one_map(pts))
    assert_allclose(back, pts, atol=1e-9)


def test_compose_runs_second_argument_first():
    a = rotation(Z, math.pi / 2)
    b = rotation(SpherePoint(1.0, 0.0, 0.0), math.pi / 2)
    p = np.array([0.0, 1.0, 0.0])
    # b sends y to z, then a fixes z
    assert_allclose(compose(a, b).time_one_map(p), [0.0, 0.0, 1.0], atol=1e-8)
    assert compose(a, b).total_duration == pytest.approx(2.0)


def test_iterate_repeats_the_map():
    f = rotation(Z, 0.3)
    p = np.array([1.0, 0.0, 0.0])
    assert_allclose(f.iterate(4).time_one_map(p), rotation(Z, 1.2).time_one_map(p), atol=1e-8)
    with pytest.raises(ValueError):
        f.iterate(0)


def test_step_size_must_be_positive():
    with pytest.raises(StepSizeInvalid):
        Isotopy.identity(0.0)
    with pytest.raises(StepSizeInvalid):
        rotation(Z, 1.0).with_step_size(float("nan"))


def test_rotation_length_is_pi_squared():
    assert lp_length(rotation(Z, 1.0)) == pytest.approx(math.pi ** 2, rel=1e-3)
    assert lp_length(rotation(SpherePoint(1.0, 1.0, 0.0), -2.0)) == pytest.approx(2.0 * math.pi ** 2, rel=2e-3)


def test_l2_length_of_rotation():
    assert lp_length(rotation(Z, 1.0), 2.0) == pytest.approx(math.sqrt(8.0 * math.pi / 3.0), rel=1e-3)


def test_identity_has_zero_length():
    assert lp_length(Isotopy.identity()) == 0.0
    assert lp_length(rotation(Z, 0.0)) == 0.0


def test_scaled_length_is_linear():
    f = rotation(Z, 1.0)
    assert lp_length(f.scaled(2.0)) == pytest.approx(2.0 * lp_length(f), rel=1e-9)


def test_time_reversal_and_concatenation_lengths():
    f = hemisphere_twist(1, 1.0)
    g = rotation(Z, 0.5)
    assert lp_length(f.inverse()) == pytest.approx(lp_length(f), abs=1e-6)
    assert lp_length(compose(f, g)) <= lp_length(f) + lp_length(g) + 1e-6


@pytest.mark.parametrize("seed", [0, 1])
def test_gradient_matches_finite_differences(seed):
    h = RandomFourierHamiltonian.generate(3, 1.0, seed)
    eps = 1e-5
    for p in uniform_points(make_rng(seed, 5), 10):
        grad = h.gradient(0.3, p)
        for v in tangent_basis(p):
            ahead = math.cos(eps) * p + math.sin(eps) * v
            behind = math.cos(eps) * p - math.sin(eps) * v
            fd = (float(h.evaluate(0.3, ahead)) - float(h.evaluate(0.3, behind))) / (2.0 * eps)
            assert fd == pytest.approx(float(grad @ v), abs=max(1e-6, 1e-4 * np.linalg.norm(grad)))


def test_coarse_quadrature_is_detected():
    f = random_fourier_isotopy(4, 1.0, seed=2)
    with pytest.raises(QuadratureTooCoarse):
        lp_length(f, quadrature=QuadratureSpec(1, 2, 2), max_refinements=0)


def test_coarse_quadrature_is_refined_until_it_converges():
    f = rotation(Z, 1.0)
    with pytest.raises(QuadratureTooCoarse):
        lp_length(f, quadrature=QuadratureSpec(1, 2, 2), max_refinements=0)
    assert lp_length(f, quadrature=QuadratureSpec(1, 2, 2)) == pytest.approx(math.pi ** 2, rel=1e-3)


def test_random_flow_family_lengths_resolve():
    lengths = [lp_length(f) for f in random_flow_family(20, 0)]
    positive = [L for L in lengths if L > 0.0]
    assert lengths[0] == 0.0
    assert len(positive) == 19
    assert max(positive) / min(positive) >= 100.0


def test_radial_twist_is_rigid_inside_and_fixed_outside():
    h = RadialTwistHamiltonian((0.0, 0.0, 1.0), math.pi / 2, 0.5, 1.0)
    f = Isotopy.from_hamiltonian(h)
    inside = SpherePoint.from_lat_lon(math.pi / 2 - 0.3, 0.0).vector
    outside = SpherePoint.from_lat_lon(math.pi / 2 - 1.5, 0.4).vector
    expected = SpherePoint.from_lat_lon(math.pi / 2 - 0.3, math.pi / 2).vector
    assert_allclose(f.time_one_map(inside), expected, atol=1e-8)
    assert_allclose(f.time_one_map(outside), outside, atol=1e-14)


def test_radial_twist_hamiltonian_is_continuous_at_inner_radius():
    h = RadialTwistHamiltonian((0.0, 0.0, 1.0), 1.0, 0.5, 1.0)
    just_in = SpherePoint.from_lat_lon(math.pi / 2 - 0.5 + 1e-9, 0.0).vector
    just_out = SpherePoint.from_lat_lon(math.pi / 2 - 0.5 - 1e-9, 0.0).vector
    assert float(h.evaluate(0.0, just_in)) == pytest.approx(float(h.evaluate(0.0, just_out)), abs=1e-7)


def test_cutoff_profile_shape():
    chi, slope = cutoff_profile(np.array([0.0, 0.2, 1.0, -1.2]))
    assert_allclose(chi, [1.0, 1.0, 0.0, 0.0])
    assert_allclose(slope, [0.0, 0.0, 0.0, 0.0])
    u = np.linspace(-1.0, 1.0, 20001)
    chi, slope = cutoff_profile(u)
    assert np.max(np.abs(slope)) <= 2.0 + 1e-12
    assert np.max(np.abs(np.diff(chi))) < 1e-3


def test_collar_restricts_to_boundary_flow():
    boundary = BoundaryIsotopy(1.0, ((2, 0.3),))
    f = collar_cutoff_isotopy(boundary, 0.1)
    q = np.arange(40) * (2.0 * math.pi / 40)
    pts = np.stack([np.cos(q), np.sin(q), np.zeros_like(q)], axis=-1)
    moved = f.time_one_map(pts)
    expected = boundary.time_one_map(q)
    diff = np.angle(np.exp(1j * (np.arctan2(moved[:, 1], moved[:, 0]) - expected)))
    assert np.max(np.abs(diff)) < 1e-9
    assert equator_displacement(f) < 1e-12


def test_collar_leaves_points_outside_support_fixed():
    f = collar_cutoff_isotopy(BoundaryIsotopy(1.0, ((2, 0.3),)), 0.1)
    p = SpherePoint.from_lat_lon(0.2, 1.0).vector
    assert_allclose(f.time_one_map(p), p, atol=1e-15)


def test_collar_width_is_checked():
    with pytest.raises(CollarTooWide):
        collar_cutoff_isotopy(BoundaryIsotopy(1.0), 1.6)
    with pytest.raises(CollarTooWide):
        collar_cutoff_isotopy(BoundaryIsotopy(1.0), 0.0)
    assert collar_cutoff_isotopy(BoundaryIsotopy(), 0.1).is_identity()


def test_hemisphere_twist_fixes_other_hemisphere():
    f = hemisphere_twist(1, 2.0)
    south = uniform_points(make_rng(1), 30)
    south[:, 2] = -np.abs(south[:, 2])
    assert_allclose(f.time_one_map(south), south, atol=1e-15)
    assert equator_displacement(f) < 1e-12
    with pytest.raises(LayoutInfeasible):
        hemisphere_twist(1, 1.0, outer_radius=1.7)


def test_ishida_layout_is_feasible_by_default():
    ok, message = check_ishida_layout(default_ishida_disks())
    assert ok, message
    ok, _ = check_ishida_layout(default_ishida_disks(area=0.2, latitude=0.2))
    assert not ok


def test_eggbeater_maps_disks_onto_themselves():
    disks = default_ishida_disks()
    f = eggbeater_family(disks, [TwistLetter(1, 3), TwistLetter(2, 4, -1)])
    for disk in disks:
        pts = disk.sample_points(20)
        assert_allclose(f.time_one_map(pts), pts, atol=1e-8)


def test_eggbeater_moves_points_between_disks():
    disks = default_ishida_disks()
    f = eggbeater_family(disks, [TwistLetter(1, 3)])
    ramp = SpherePoint.from_lat_lon(0.0, 1.0).vector
    assert float(angle_between(f.time_one_map(ramp), ramp)) > 1e-3


def test_eggbeater_layout_is_checked():
    disks = default_ishida_disks()
    with pytest.raises(LayoutInfeasible):
        eggbeater_family(disks, [TwistLetter(1, 3)], r=20.0)
    with pytest.raises(LayoutInfeasible):
        eggbeater_family(disks, [TwistLetter(1, 3)], r=0.0)


def test_twist_region_must_avoid_other_disks():
    crowded = (
        Disk.from_area(SpherePoint.from_lat_lon(0.5, 0.0), 0.01),
        Disk.from_area(SpherePoint.from_lat_lon(0.5, 0.4), 0.01),
        Disk.from_area(SpherePoint.from_lat_lon(-0.5, 0.0), 0.01),
        Disk.from_area(SpherePoint.from_lat_lon(-0.5, math.pi), 0.01),
    )
    with pytest.raises(LayoutInfeasible):
        twist_hamiltonian(crowded, TwistLetter(1, 3))


def test_rotation_preserves_disk_area():
    disk = Disk.from_area(SpherePoint(1.0, 0.0, 0.0), 0.1)
    ok, area, stderr = disk_area_check(rotation(Z, 1.0), disk, make_rng(21), samples=20000)
    assert ok, (area, stderr)


@pytest.mark.parametrize("center", [(0.0, 0.6), (0.5, 0.0), (-0.3, 2.5)])
def test_eggbeater_preserves_disk_area(center):
    f = eggbeater_family(default_ishida_disks(), [TwistLetter(1, 3)])
    disk = Disk.from_area(SpherePoint.from_lat_lon(*center), 0.05)
    ok, area, stderr = disk_area_check(f, disk, make_rng(22), samples=20000)
    assert ok, (area, stderr)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_random_fourier_flow_preserves_disk_area(seed):
    f = random_fourier_isotopy(3, 1.0, seed=seed)
    disk = Disk.from_area(SpherePoint.from_vector(uniform_points(make_rng(seed, 5), 1)[0]), 0.1)
    ok, area, stderr = disk_area_check(f, disk, make_rng(23, seed), samples=20000)
    assert ok, (area, stderr)


def test_step_halving_converges_at_second_order():
    pts = uniform_points(make_rng(6), 10)
    ends = [random_fourier_isotopy(3, 1.0, seed=4, step_size=h).time_one_map(pts) for h in (0.1, 0.05, 0.025)]
    coarse = float(np.max(angle_between(ends[0], ends[1])))
    fine = float(np.max(angle_between(ends[1], ends[2])))
    assert math.log2(coarse / fine) >= 1.8


def test_eggbeater_map_is_exact_under_step_halving():
    pts = uniform_points(make_rng(7), 10)
    ends = [eggbeater_family(default_ishida_disks(), [TwistLetter(1, 3)], step_size=h).time_one_map(pts)
            for h in (0.1, 0.05)]
    assert_allclose(ends[0], ends[1], atol=1e-10)

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from core.braids import (
    BraidWord, braid_compose, braid_from_strands, braid_inverse, braid_invariants, cocycle_check, crossing_counts,
    extract_braid, extract_braid_with_retry, format_braid, format_braid_json, free_reduce, is_pure,
    jitter_configuration, parse_braid, parse_braid_json, permutation, pure_generator_word, word_from_path,
)
from core.errors import ParseError, PoleCollision, StrandMismatch, TangentialCrossing
from core.flows import Isotopy, TwistLetter, default_ishida_disks, eggbeater_family, rotation
from core.sphere_geometry import (
    DEFAULT_PROJECTION_POLE, Configuration, SpherePoint, angle_between, base_configuration, make_rng,
)


def half_twist_strands(turns=0.5, samples=100):
    t = np.linspace(0.0, 2.0 * math.pi * turns, samples)
    a = np.stack([np.cos(t), np.sin(t)], axis=-1)
    return np.stack([a, -a], axis=1)


def configuration(lat_lons):
    return Configuration(np.array([SpherePoint.from_lat_lon(lat, lon).vector for lat, lon in lat_lons]))


def test_free_reduce_cancels_adjacent_inverses():
    assert free_reduce([(1, 1), (2, 1), (2, -1), (1, -1)]) == ()
    assert free_reduce([(1, 1), (1, 1), (2, -1)]) == ((1, 1), (1, 1), (2, -1))


def test_braid_word_validates_letters():
    with pytest.raises(ValueError):
        BraidWord(3, ((3, 1),))
    with pytest.raises(ValueError):
        BraidWord(3, ((1, 2),))
    with pytest.raises(ValueError):
        BraidWord(2, (), labels=(1, 1))


def test_permutation_and_purity():
    assert permutation(BraidWord(3, ((1, 1),))) == (2, 1, 3)
    assert not is_pure(BraidWord(3, ((1, 1),)))
    assert is_pure(BraidWord(3, ((1, 1), (1, 1))))


def test_compose_with_inverse_is_trivial():
    w = parse_braid("s1 s2^-1 s3 s1", n=4)
    assert braid_compose(w, braid_inverse(w)).letters == ()
    assert braid_compose(braid_inverse(w), w).letters == ()


def test_compose_runs_second_word_first():
    a = parse_braid("s2", n=3)
    b = parse_braid("s1", n=3)
    assert braid_compose(a, b).letters == ((1, 1), (2, 1))


def test_compose_checks_strand_count_and_labels():
    with pytest.raises(StrandMismatch):
        braid_compose(BraidWord(2, ((1, 1),)), BraidWord(3, ((1, 1),)))
    b = BraidWord(2, ((1, 1),), labels=(1, 2))
    assert braid_compose(BraidWord(2, (), labels=(2, 1)), b).labels == (1, 2)
    with pytest.raises(StrandMismatch):
        braid_compose(BraidWord(2, (), labels=(1, 2)), b)


def test_power_and_inverse():
    w = parse_braid("s1 s2")
    assert w.power(3).letters == ((1, 1), (2, 1)) * 3
    assert w.power(-1).letters == ((2, -1), (1, -1))


def test_pure_generator_word_links_only_its_pair():
    w = pure_generator_word(3, 1, 3)
    assert w.letters == ((2, 1), (1, 1), (1, 1), (2, -1))
    assert is_pure(w)
    assert crossing_counts(w) == {(1, 3): 2, (2, 3): 0}
    with pytest.raises(ValueError):
        pure_generator_word(3, 2, 2)


def test_text_format():
    w = parse_braid("s1 s2^-1 s1^+1")
    assert w.n == 3
    assert format_braid(w) == "s1 s2^-1 s1"
    assert parse_braid("σ1 σ2^-1").letters == ((1, 1), (2, -1))
    assert parse_braid("").letters == ()
    assert parse_braid("").n == 2


@pytest.mark.parametrize("text", ["s0", "x1", "s1^2", "s1^", "s-1"])
def test_malformed_text_raises(text):
    with pytest.raises(ParseError):
        parse_braid(text)


def test_generator_beyond_strand_count_raises():
    with pytest.raises(ParseError):
        parse_braid("s3", n=3)


def test_json_format():
    w = parse_braid_json("[[1, 1], [2, -1]]")
    assert w.letters == ((1, 1), (2, -1))
    assert format_braid_json(w) == "[[1, 1], [2, -1]]"
    labelled = parse_braid_json('{"n": 3, "letters": [[1, 1]], "labels": [3, 1, 2]}')
    assert labelled.labels == (3, 1, 2)
    assert labelled.end_labels() == (1, 3, 2)


@pytest.mark.parametrize("text", ["{", "[[1, 2]]", "[[0, 1]]", "[1, 1]", '"s1"'])
def test_malformed_json_raises(text):
    with pytest.raises(ParseError):
        parse_braid_json(text)


def test_invariant_table():
    table = braid_invariants(parse_braid("s1 s1"))
    assert table["permutation"] == [1, 2]
    assert table["exponent_sum"] == 2
    assert table["lk_1_2"] == 1.0
    assert braid_invariants(parse_braid("s1 s1 s1"))["signature"] == -2


def test_counterclockwise_half_twist_is_positive():
    word, diagram = braid_from_strands(half_twist_strands(0.5))
    assert word.letters == ((1, 1),)
    assert len(diagram.crossings) == 1
    assert diagram.crossings[0].sign == 1


def test_full_twist_links_once():
    word, _ = braid_from_strands(half_twist_strands(1.0))
    assert word.letters == ((1, 1), (1, 1))
    assert crossing_counts(word) == {(1, 2): 2}


def test_clockwise_twist_is_negative():
    word, _ = braid_from_strands(half_twist_strands(-1.0))
    assert word.letters == ((1, -1), (1, -1))


def test_labels_follow_starting_positions():
    word, _ = braid_from_strands(half_twist_strands(0.5), labels=(1, 2))
    # strand 2 starts on the left
    assert word.labels == (2, 1)
    assert word.end_labels() == (1, 2)


def test_touching_strands_are_rejected():
    planar = np.zeros((3, 2, 2))
    planar[:, 0, 0] = [-1.0, 0.0, 1.0]
    planar[:, 1, 0] = [1.0, 0.0, -1.0]
    with pytest.raises(TangentialCrossing):
        braid_from_strands(planar)


def test_strands_meeting_in_projection_are_rejected():
    planar = np.zeros((2, 2, 2))
    planar[:, 0, 0] = [-1.0, 1.0]
    planar[:, 1, 0] = [1.0, -1.0]
    with pytest.raises(TangentialCrossing):
        braid_from_strands(planar)


def test_identity_flow_gives_trivial_braid():
    x = configuration([(0.6, 0.2), (0.9, 2.0), (-0.5, 1.0), (-0.8, 4.0)])
    z = base_configuration(4, 2)
    word = extract_braid(Isotopy.identity(), x, z)
    assert word.letters == ()


def test_path_through_projection_pole_is_rejected():
    path = np.tile(DEFAULT_PROJECTION_POLE, (5, 2, 1))
    path[:, 1] = [0.0, 0.0, 1.0]
    with pytest.raises(PoleCollision):
        word_from_path(path)


def test_strand_count_must_match():
    with pytest.raises(StrandMismatch):
        extract_braid(Isotopy.identity(), base_configuration(4, 2), base_configuration(5, 2))


def test_jitter_moves_points_slightly():
    z = base_configuration(4, 2).points
    moved = jitter_configuration(z, make_rng(0), 1e-6)
    assert_allclose(angle_between(z, moved), 1e-6, rtol=1e-6)


@pytest.mark.parametrize("seed", [0, 1])
def test_cocycle_identity_for_polar_rotations(seed):
    rng = make_rng(seed)
    lats = rng.uniform(0.4, 1.2, 4) * np.array([1.0, 1.0, -1.0, -1.0])
    lons = rng.uniform(0.0, 2.0 * math.pi, 4)
    x = configuration(list(zip(lats, lons)))
    z = base_configuration(4, 2)
    axis = SpherePoint(0.0, 0.0, 1.0)
    report = cocycle_check(rotation(axis, 0.7), rotation(axis, 1.9), x, z)
    assert report.agree, report.mismatches


def test_retry_separates_strands_mirrored_across_the_equator():
    # D1/D3 and D2/D4 centers share their projected first coordinate
    x = configuration([(0.5, 0.0), (0.5, math.pi), (-0.5, 0.0), (-0.5, math.pi)])
    z = base_configuration(4, 2)
    with pytest.raises(TangentialCrossing):
        extract_braid(Isotopy.identity(), x, z)
    word = extract_braid_with_retry(Isotopy.identity(), x, z, seed=3)
    assert word.letters == ()


def disk_configuration():
    # one point in each default disk, off the centers so no two strands share a projected coordinate
    return configuration([(0.52, 0.03), (0.49, math.pi - 0.02), (-0.51, 0.02), (-0.48, math.pi + 0.03)])


@pytest.mark.parametrize("k", [1, 2, 3])
def test_eggbeater_links_the_twisted_disks_once_per_iterate(k):
    f = eggbeater_family(default_ishida_disks(), [TwistLetter(1, 3)]).iterate(k)
    word = extract_braid_with_retry(f, disk_configuration(), base_configuration(4, 2))
    table = braid_invariants(word)
    assert table["lk_1_3"] == k
    assert all(table[key] == 0 for key in ("lk_1_2", "lk_1_4", "lk_2_3", "lk_2_4", "lk_3_4"))
    assert is_pure(word)


def test_invariants_do_not_depend_on_the_projection_pole():
    f = eggbeater_family(default_ishida_disks(), [TwistLetter(1, 3)]).iterate(2)
    x, z = disk_configuration(), base_configuration(4, 2)
    reference = braid_invariants(extract_braid(f, x, z))
    rng = make_rng(11)
    for _ in range(20):
        pole = jitter_configuration(DEFAULT_PROJECTION_POLE[None, :], rng, 0.15)[0]
        assert braid_invariants(extract_braid(f, x, z, pole)) == reference


def test_invariants_do_not_depend_on_a_nearby_base_configuration():
    f = eggbeater_family(default_ishida_disks(), [TwistLetter(1, 3)])
    x, z = disk_configuration(), base_configuration(4, 2)
    reference = braid_invariants(extract_braid(f, x, z))
    rng = make_rng(12)
    for _ in range(10):
        moved = jitter_configuration(z.points, rng, 0.05)
        assert braid_invariants(extract_braid(f, x, moved)) == reference

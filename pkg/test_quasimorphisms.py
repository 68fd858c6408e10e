import math
import pickle

import pytest

from core.braids import BraidWord, braid_compose, is_pure, parse_braid, pure_generator_word
from core.errors import ConfigInvalid
from core.quasimorphisms import (
    CALIBRATION_FACTOR, QUASIMORPHISM_NAMES, build_quasimorphism, calibrate_defect, conjugation_defect,
    cross_linking_qm, default_cross_weights, defect_estimate, exponent_sum, exponent_sum_qm, homogenize,
    inversion_defect, linking_number, random_pure_word, random_word, signature_qm,
)
from core.sphere_geometry import make_rng


def test_exponent_sum_and_linking_number():
    w = parse_braid("s1 s1 s2^-1", n=3)
    assert exponent_sum(w) == 1
    assert linking_number(w, 1, 2) == 1.0
    assert linking_number(w, 2, 3) == -0.5
    with pytest.raises(ValueError):
        linking_number(w, 2, 2)


def test_default_cross_weights_pair_the_two_blocks():
    assert default_cross_weights(4) == {(1, 3): 1.0, (1, 4): 1.0, (2, 3): 1.0, (2, 4): 1.0}


def test_cross_linking_counts_weighted_links():
    qm = cross_linking_qm(default_cross_weights(4), block_size=2)
    assert qm(pure_generator_word(4, 1, 3)) == 1.0
    assert qm(pure_generator_word(4, 1, 2)) == 0.0
    assert qm.vanishes_on_split
    assert qm.homogeneous


def test_cross_linking_vanishes_on_split_braids():
    qm = build_quasimorphism("cross-linking", 4)
    split = parse_braid("s1 s1 s3^-1 s3^-1 s1 s1", n=4)
    assert qm(split) == 0.0


def test_split_certificate_needs_crossing_weights():
    assert not cross_linking_qm({(1, 2): 1.0}, block_size=2).vanishes_on_split
    assert not cross_linking_qm({(1, 3): 1.0}).vanishes_on_split


def test_cross_linking_rejects_bad_weights():
    with pytest.raises(ValueError):
        cross_linking_qm({(1, 3): math.nan})
    with pytest.raises(ValueError):
        cross_linking_qm({(2, 2): 1.0})


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_homomorphisms_have_zero_defect_on_pure_words(seed):
    qm = build_quasimorphism("cross-linking", 4)
    assert defect_estimate(qm, make_rng(seed), trials=100, word_length=8, pure=True) == 0.0
    assert inversion_defect(qm, make_rng(seed), trials=100, word_length=8) == 0.0
    assert conjugation_defect(qm, make_rng(seed), trials=100, word_length=8) == 0.0
    assert defect_estimate(exponent_sum_qm(), make_rng(seed), trials=100, word_length=8) == 0.0


def test_exponent_sum_is_additive_on_any_words():
    rng = make_rng(4)
    qm = exponent_sum_qm()
    for _ in range(50):
        a, b = random_word(rng, 4, 12), random_word(rng, 4, 12)
        assert qm(braid_compose(a, b)) == qm(a) + qm(b)


def test_random_pure_words_are_pure():
    rng = make_rng(8)
    assert all(is_pure(random_pure_word(rng, 5, 6)) for _ in range(20))


def test_signature_plugin():
    qm = signature_qm(declared_defect=3.0)
    assert qm(parse_braid("s1 s1 s1")) == -2.0
    assert not qm.homogeneous
    assert qm.manifest()["declared_defect"] == 3.0
    with pytest.raises(ValueError):
        signature_qm(-1.0)


def test_calibration_freezes_declared_defect():
    qm, observed = calibrate_defect(signature_qm(), make_rng(1), trials=200, word_length=6)
    assert qm.declared_defect == pytest.approx(CALIBRATION_FACTOR * observed)
    assert qm.parameters["calibration"]["trials"] == 200
    assert observed >= 0.0


def test_defect_estimate_samples_general_words():
    # s1 s1 alone already has a signature defect of 1
    assert defect_estimate(signature_qm(), make_rng(2), trials=50, word_length=6) >= 1.0
    assert defect_estimate(exponent_sum_qm(), make_rng(2), trials=50, word_length=6) == 0.0


def test_signature_plugin_is_calibrated_when_built_by_name():
    qm = build_quasimorphism("signature", 4, {"calibration_trials": 100, "calibration_seed": 3})
    calibration = qm.manifest()["parameters"]["calibration"]
    assert calibration["trials"] == 100
    assert calibration["words"] == "general"
    assert calibration["observed"] >= 1.0
    assert qm.declared_defect == pytest.approx(CALIBRATION_FACTOR * calibration["observed"])
    again = build_quasimorphism("signature", 4, {"calibration_trials": 100, "calibration_seed": 3})
    assert again.declared_defect == qm.declared_defect


def test_homogenization():
    est = homogenize(exponent_sum_qm(), parse_braid("s1 s2^-1 s1"), k_max=5)
    assert est.value == 1.0
    assert est.converged
    est = homogenize(signature_qm(), parse_braid("s1 s1"), k_max=10)
    assert est.per_k[0] == -1.0
    assert est.value == pytest.approx(-2.0 + 1.0 / 10)
    assert not est.converged
    with pytest.raises(ValueError):
        homogenize(exponent_sum_qm(), parse_braid("s1"), k_max=1)


def test_build_quasimorphism_by_name():
    assert set(QUASIMORPHISM_NAMES) == {"exponent-sum", "cross-linking", "signature"}
    qm = build_quasimorphism("cross-linking", 4, {"weights": {"1-3": 2.0}})
    assert qm(pure_generator_word(4, 1, 3)) == 2.0
    assert qm.manifest()["parameters"]["weights"] == {"1-3": 2.0}
    assert build_quasimorphism("signature", 6, {"declared_defect": 6}).declared_defect == 6.0
    with pytest.raises(ConfigInvalid):
        build_quasimorphism("rotation-number", 4)


def test_plugins_are_picklable():
    for name in QUASIMORPHISM_NAMES:
        qm = build_quasimorphism(name, 4)
        clone = pickle.loads(pickle.dumps(qm))
        w = BraidWord(4, ((1, 1), (2, 1), (1, 1), (3, -1)))
        assert clone(w) == qm(w)
        assert clone.manifest() == qm.manifest()

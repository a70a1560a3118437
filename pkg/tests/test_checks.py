from fractions import Fraction

import pytest

from sirsn.checks import (LemmaReport, check_admissable, check_box_exclusion, check_peak,
                          check_polyline_admissable, extract_b, extract_constants, figure6_configuration,
                          lemma_suite, radius_suite, verify_figure6)
from sirsn.dyadic import ModelParams, ParameterError
from sirsn.routing import RouteEngine

G = Fraction(3, 4)


def test_lemma_report_records_first_witness():
    rep = LemmaReport("x")
    rep.record(True)
    rep.record(False, {"a": 1})
    rep.record(False, {"a": 2})
    assert (rep.trials, rep.failures, rep.witness, rep.ok) == (3, 2, {"a": 1}, False)


def test_small_lemma_suite_has_no_failures():
    out = lemma_suite(ModelParams(finest_level=-2, master_seed=13), n_pairs=60, extent=64)
    for key in ("peak", "admissable", "compatibility", "sigma2", "multiresolution"):
        assert out[key]["failures"] == 0, out[key]["witness"]
        assert out[key]["trials"] > 0


def test_single_segment_route_is_peak_and_admissable():
    r = RouteEngine(ModelParams(finest_level=0)).route((3, 5), (3, 9))
    assert r.turns == ((3, 5), (3, 9))
    assert check_peak(r) and check_admissable(r)


def test_non_admissable_polyline_rejected():
    # x-values 4, 12, 8: two distinct points of height 2 on one side of the peak
    assert not check_polyline_admissable(((4, 1), (12, 1), (12, 3), (8, 3)))
    assert check_polyline_admissable(((1, 0), (0, 0), (0, 2), (1, 2)))


def test_figure6_configuration_values():
    cfg = figure6_configuration(4, G)
    assert cfg["b"] == (17, 16)
    assert cfg["d"] == (17, 16 + Fraction(1, 16))
    assert cfg["c_star"] == (18 - G ** 3, 18)
    assert cfg["eta"] == Fraction(1, 48)
    assert cfg["pi_cost"] == Fraction(273, 128)


def test_figure6_verified_at_h4():
    rep = verify_figure6(4, G)
    assert rep.ok
    assert rep.details["pi1_cost"] == rep.details["pi2_cost"] == "273/128"
    assert Fraction(rep.details["avoiding_excess"]) >= Fraction(1, 48)


def test_figure6_fails_at_h3():
    rep = verify_figure6(3, G)
    assert not rep.ok
    assert rep.details["pi1_cost"] == str(2 * G ** 3 + 2 * G)


def test_figure6_rejects_coarse_level():
    with pytest.raises(ParameterError):
        verify_figure6(4, G, level=-2)


def test_box_exclusion_and_radius_small_budget():
    b, reps = extract_b(300)
    assert b == 1 and reps[-1].ok
    assert radius_suite(b, 150).ok
    with pytest.raises(ParameterError):
        check_box_exclusion(0, 10)


def test_constants_are_sane():
    rep = extract_constants(60)
    assert rep.ok
    assert rep.constants["K"] >= 1.0
    assert rep.constants["K_prime"] >= 1.0
    assert rep.constants["beta"] == pytest.approx(0.5849625007211562)

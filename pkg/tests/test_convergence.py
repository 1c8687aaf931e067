from __future__ import annotations

import math

import numpy as np
import pytest

from minorbit import convergence as conv
from minorbit import families as fam
from minorbit.exchange import dumps17
from minorbit.families import FamilyParams, ParameterError

P = FamilyParams(gamma=0.5)
OSC = FamilyParams(gamma=0.6, delta=0.36)


@pytest.fixture(scope="module")
def norm_report():
    return conv.run_norm_convergence(P)


@pytest.fixture(scope="module")
def sot_report():
    return conv.run_sot_convergence(P)


@pytest.fixture(scope="module")
def shifted_report():
    return conv.run_shifted_norm_convergence(P)


@pytest.fixture(scope="module")
def curve_report():
    return conv.run_curve_convergence(P, t_samples=17)


@pytest.fixture(scope="module")
def osc_report():
    return conv.run_oscillant_convergence(OSC)


def test_fitted_ratio_of_exact_geometric():
    ns = [4, 8, 16, 32]
    assert conv.fitted_ratio(ns, [3 * 0.6**n for n in ns]) == pytest.approx(0.6, abs=1e-12)


def test_fitted_ratio_needs_four_points():
    assert conv.fitted_ratio([4, 8, 16], [1.0, 0.5, 0.25]) is None


def test_analytic_tails_match_dense_sums():
    g, n = 0.6, 7
    L = fam.build_L(FamilyParams(gamma=g, N=200)).imag
    Y1 = fam.build_Y1(FamilyParams(gamma=g, N=200)).imag
    mask = np.zeros((200, 200), bool)
    mask[:n, :n] = True
    assert conv.L_tail(g, n) == pytest.approx(np.linalg.norm(L[~mask]), rel=1e-12)
    assert conv.Y1_tail(g, n) == pytest.approx(np.linalg.norm(Y1[~mask]), rel=1e-12)


def test_n_list_validation():
    with pytest.raises(ParameterError):
        conv.run_norm_convergence(P, [70])
    with pytest.raises(ParameterError):
        conv.run_norm_convergence(P, [8, 4])


class TestNorm:
    def test_assertions_pass(self, norm_report):
        assert norm_report.passed, norm_report.first_failure

    def test_distance_rate_is_gamma(self, norm_report):
        assert abs(norm_report.fitted_ratios["Yr_minus_Yn"] - 0.5) <= 0.15

    def test_r_gap_decays_at_gamma_squared(self, norm_report):
        # r - r_n is proportional to the squared tail of the pivot column
        assert norm_report.fitted_ratios["r_gap"] == pytest.approx(0.25, abs=0.01)

    def test_full_rank_is_exact(self):
        rep = conv.run_norm_convergence(P, [32, 64])
        assert rep.metrics["Yr_minus_Yn"][-1] <= 1e-10

    def test_M0_consistent(self, norm_report):
        assert norm_report.constants["M0"] == fam.compute_M0(P)


class TestSot:
    def test_assertions_pass(self, sot_report):
        assert sot_report.passed, sot_report.first_failure

    def test_second_entry_converges(self, sot_report):
        errs = sot_report.tables["probe"]["e2"]
        assert errs == sorted(errs, reverse=True) and errs[-1] < 1e-15 * 1e6

    def test_norm_gap_about_two(self, sot_report):
        assert all(abs(v - 2.0) < 0.1 for v in sot_report.metrics["diagonal_norm_gap"])

    def test_first_probe_is_zero(self):
        sot_report = conv.run_sot_convergence(P, [64])
        assert sot_report.tables["probe"]["e1"] == [0.0]


class TestShifted:
    def test_assertions_pass(self, shifted_report):
        assert shifted_report.passed, shifted_report.first_failure

    def test_small_at_32(self, shifted_report):
        assert shifted_report.metrics["shifted_distance"][-1] <= 1e-6

    def test_component_formula_by_hand(self):
        # n = 4, gamma = 1/2: max{gamma^4 / (1 - gamma^2), |d_5 + 2|}
        v = conv.shifted_diagonal_component(0.5, 4, 64)
        d5 = fam.d_limit(0.5, 5)
        assert v == pytest.approx(max(0.0625 / 0.75, abs(d5 + 2)), abs=1e-15)


@pytest.mark.slow
class TestCurves:
    def test_assertions_pass(self, curve_report):
        assert curve_report.passed, curve_report.first_failure

    def test_sup_distance_improves(self, curve_report):
        d = curve_report.metrics["sup_distance"]
        assert d[3] < d[1]

    def test_lengths(self, curve_report):
        assert max(abs(x - math.pi) for x in curve_report.metrics["length"]) <= 1e-8


class TestOscillant:
    def test_region_checked(self):
        with pytest.raises(ParameterError):
            conv.run_oscillant_convergence(FamilyParams(gamma=0.6, delta=0.5))

    def test_certified_at_M1(self, osc_report):
        assert osc_report.assertion("all_certified_with_value_M1").passed
        assert osc_report.constants["M1"] == fam.compute_M1(OSC)

    def test_limits_classified(self, osc_report):
        assert osc_report.assertion("two_limits_classified").passed
        assert osc_report.constants["classified_even_limit"] == pytest.approx(0.625, abs=1e-8)
        assert osc_report.constants["classified_odd_limit"] == pytest.approx(-0.9375, abs=1e-8)

    def test_interior_interleaving(self, osc_report):
        assert min(osc_report.metrics["interleaving_interior_slack"]) >= -1e-10

    def test_edge_interleaving_broken_but_vanishing(self, osc_report):
        # at l = n the finite diagonal misses the limit inequality; the miss shrinks with n
        edge = osc_report.metrics["interleaving_edge_slack"]
        assert all(e < 0 for e in edge)
        assert all(abs(b) < abs(a) for a, b in zip(edge, edge[1:]))
        assert not osc_report.assertion("interleaving_holds").passed

    def test_shifted_distance_plateau(self, osc_report):
        # the entry l = n stays 1/(1 - gamma^2) away from the limit diagonal
        d = osc_report.metrics["shifted_distance"]
        assert conv.strictly_decreasing(d)
        assert d[-1] == pytest.approx(1 / (1 - 0.36), abs=1e-6)
        dev = osc_report.metrics["max_diagonal_deviation"][-1]
        assert dev == pytest.approx(1 / (1 - 0.36), abs=1e-6)

    def test_alternative_region_runs(self):
        rep = conv.run_oscillant_convergence(FamilyParams(gamma=0.5, delta=0.25))
        assert rep.assertion("all_certified_with_value_M1").passed


def test_reports_are_deterministic():
    a = dumps17(conv.run_shifted_norm_convergence(P).to_dict())
    b = dumps17(conv.run_shifted_norm_convergence(P).to_dict())
    assert a == b


def test_csv_rows_cover_every_n(norm_report):
    header, rows = norm_report.csv_rows()
    assert header[0] == "n" and [r[0] for r in rows] == norm_report.n_list
    assert all(len(r) == len(header) for r in rows)

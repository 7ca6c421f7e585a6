from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import ho_fq2_reference
from quasistatic import ising, protocols
from quasistatic.errors import SynthesisError
from quasistatic.oscillator import ho_spectrum_adapter
from quasistatic.records import read_record, write_schedule_csv

N, J = 100, 1.0
CHAIN = ising.IsingChain(N, J)
FQ = ising.lowest_channel(CHAIN, "FQ")
UQ = ising.lowest_channel(CHAIN, "UQ")
HO = ho_spectrum_adapter()
K0 = math.pi / N


@pytest.fixture(scope="module")
def crossing_pair():
    tau = 50.0
    return {
        "uqa": (protocols.fqa(UQ, 2.0, 0.2, 0.0, tau), protocols.ti_uqa(N, J, 2.0, 0.2, 0.0, tau)),
        "uq2": (protocols.fq2(UQ, 2.0, 0.2, 0.0, tau), protocols.ti_uq2(N, J, 2.0, 0.2, 0.0, tau)),
    }


def test_linear_examples():
    s = protocols.linear(3.0, 1.2, 0.0, 3.0)
    assert s.value(1.0) == pytest.approx(2.4)
    assert s.value(1.5) == pytest.approx(2.1)
    np.testing.assert_allclose(s.derivative(np.array([0.0, 2.0])), -0.6)
    assert s.flavor == "LIN" and s.rate_constant is None


def test_schedule_rejects_empty_interval():
    with pytest.raises(ValueError):
        protocols.linear(1.0, 2.0, 1.0, 1.0)


@pytest.mark.parametrize("make", [
    lambda: protocols.fqa(FQ, 3.0, 1.2, 0.0, 3.0),
    lambda: protocols.fq2(FQ, 3.0, 1.2, 0.0, 3.0),
    lambda: protocols.fqa(HO, 1.0, 2.0, 0.0, 3.0),
    lambda: protocols.fq2(HO, 2.0, 1.0, 0.0, 3.0),
    lambda: protocols.ti_uqa(N, J, 2.0, 0.2, 0.0, 50.0),
    lambda: protocols.ti_uq2(N, J, 2.0, 0.2, 0.0, 50.0),
    lambda: protocols.iie(1.0, 1.0, 2.0, 0.0, 3.0),
])
def test_boundary_values(make):
    s = make()
    scale = abs(s.lam_f - s.lam_i)
    assert abs(s.value(s.t_i) - s.lam_i) <= 1e-9 * scale
    assert abs(s.value(s.t_f) - s.lam_f) <= 1e-9 * scale


def test_fqa_matches_ising_closed_form():
    generic = protocols.fqa(FQ, 3.0, 1.2, 0.0, 3.0)
    closed = protocols.ti_fqa(N, J, 3.0, 1.2, 0.0, 3.0)
    t = np.linspace(0.0, 3.0, 1001)
    np.testing.assert_allclose(generic.value(t), closed.value(t), rtol=0, atol=1e-8)
    np.testing.assert_allclose(generic.derivative(t), closed.derivative(t), rtol=1e-8)
    assert generic.rate_constant == pytest.approx(closed.rate_constant, rel=1e-10)


def test_rate_constant_scaling():
    c1 = [protocols.fqa(FQ, 3.0, 1.2, 0.0, tau).rate_constant for tau in (3.0, 6.0)]
    c2 = [protocols.fq2(HO, 1.0, 2.0, 0.0, tau).rate_constant for tau in (3.0, 6.0)]
    assert c1[0] / c1[1] == pytest.approx(2.0, rel=1e-10)
    assert c2[0] / c2[1] == pytest.approx(4.0, rel=1e-8)
    h = [protocols.ho_fqa(1.0, 2.0, 0.0, tau).rate_constant for tau in (3.0, 6.0)]
    assert h[0] / h[1] == pytest.approx(2.0, rel=1e-12)


def test_oscillator_fqa_midpoint_is_harmonic_mean():
    s = protocols.fqa(HO, 1.0, 2.0, 0.0, 3.0)
    assert s.value(1.5) == pytest.approx(4.0 / 3.0, abs=1e-10)
    t = np.linspace(0.0, 3.0, 301)
    np.testing.assert_allclose(s.value(t), protocols.ho_fqa(1.0, 2.0, 0.0, 3.0).value(t), atol=1e-10, rtol=0)


@given(st.floats(0.2, 5.0), st.floats(0.2, 5.0), st.floats(0.5, 20.0))
def test_oscillator_fqa_generic_equals_closed_form(w_i, w_f, tau):
    if abs(w_i - w_f) < 1e-3:
        return
    t = np.linspace(0.0, tau, 41)
    g = protocols.fqa(HO, w_i, w_f, 0.0, tau, cells=256)
    np.testing.assert_allclose(g.value(t), protocols.ho_fqa(w_i, w_f, 0.0, tau).value(t), rtol=1e-10)


def test_oscillator_fq2_matches_high_precision_closed_form():
    s = protocols.fq2(HO, 1.0, 2.0, 0.0, 3.0)
    for frac in (0.1, 0.25, 0.5, 0.8, 1.0):
        assert s.value(3.0 * frac) == pytest.approx(ho_fq2_reference(1.0, 2.0, frac), abs=1e-6)
    assert s.value(1.5) == pytest.approx(1.1311, abs=1e-4)
    closed = protocols.ho_fq2(1.0, 2.0, 0.0, 3.0)
    t = np.linspace(0.0, 3.0, 1001)
    np.testing.assert_allclose(s.value(t), closed.value(t), atol=1e-6, rtol=0)
    assert s.rate_constant == pytest.approx(closed.rate_constant, rel=1e-8)


def test_oscillator_fq2_compression_uses_erfi_continuation():
    generic = protocols.fq2(HO, 2.0, 1.0, 0.0, 3.0)
    closed = protocols.ho_fq2(2.0, 1.0, 0.0, 3.0)
    t = np.linspace(0.0, 3.0, 1001)
    np.testing.assert_allclose(generic.value(t), closed.value(t), atol=1e-6, rtol=0)
    assert protocols.residual_check(closed, HO, 2) <= 1e-4


@pytest.mark.parametrize("make", [
    lambda: protocols.fq2(FQ, 3.0, 1.2, 0.0, 3.0),
    lambda: protocols.fq2(FQ, 1.2, 3.0, 0.0, 3.0),
    lambda: protocols.fq2(UQ, 2.0, 0.2, 0.0, 50.0),
    lambda: protocols.fq2(HO, 1.0, 2.0, 0.0, 3.0),
    lambda: protocols.ho_fq2(1.0, 2.0, 0.0, 3.0),
    lambda: protocols.ho_fq2(2.0, 1.0, 0.0, 3.0),
    lambda: protocols.ti_uq2(N, J, 2.0, 0.2, 0.0, 50.0),
])
def test_second_order_protocols_start_from_rest(make):
    s = make()
    assert abs(s.derivative(s.t_i)) <= 1e-8 * abs(s.lam_f - s.lam_i) / s.tau


def test_ising_fq2_satisfies_second_order_ode():
    s = protocols.fq2(FQ, 3.0, 1.2, 0.0, 3.0)
    assert s.flavor == "FQ2"
    assert protocols.residual_check(s, FQ, 2) <= 1e-4
    t = np.linspace(0.0, 3.0, 2001)
    assert np.all(np.diff(s.value(t)) < 0)


def test_fq2_is_not_time_reversal_symmetric():
    forward = protocols.fq2(FQ, 3.0, 1.2, 0.0, 3.0)
    backward = protocols.fq2(FQ, 1.2, 3.0, 0.0, 3.0)
    t = np.linspace(0.0, 3.0, 501)
    assert np.max(np.abs(backward.value(t) - forward.value(3.0 - t))) > 1e-2


def test_fqa_is_time_reversal_symmetric():
    forward = protocols.fqa(FQ, 3.0, 1.2, 0.0, 3.0)
    backward = protocols.fqa(FQ, 1.2, 3.0, 0.0, 3.0)
    t = np.linspace(0.0, 3.0, 501)
    np.testing.assert_allclose(backward.value(t), forward.value(3.0 - t), atol=1e-9)


def test_uqa_generic_matches_closed_form(crossing_pair):
    generic, closed = crossing_pair["uqa"]
    t = np.linspace(0.0, 50.0, 2001)
    np.testing.assert_allclose(generic.value(t), closed.value(t), atol=1e-6, rtol=0)
    assert generic.rate_constant == pytest.approx(closed.rate_constant, rel=1e-8)
    assert generic.breakpoints[0] == pytest.approx(closed.breakpoints[0], rel=1e-9)


def test_uq2_generic_matches_closed_form(crossing_pair):
    generic, closed = crossing_pair["uq2"]
    t = np.linspace(0.0, 50.0, 2001)
    np.testing.assert_allclose(generic.value(t), closed.value(t), atol=1e-6, rtol=0)
    assert generic.rate_constant == pytest.approx(closed.rate_constant, rel=1e-8)
    assert generic.breakpoints[0] == pytest.approx(closed.breakpoints[0], rel=1e-9)


def test_bogoliubov_angle_is_right_angle_at_gap_minimum():
    for k in (0.1, 1.0, 2.5):
        assert ising.bogoliubov_angle(CHAIN, k, J * math.cos(k)) == pytest.approx(math.pi / 2)


@pytest.mark.parametrize("name", ["uqa", "uq2"])
def test_crossing_protocols_reach_gap_minimum_at_switch_time(crossing_pair, name):
    closed = crossing_pair[name][1]
    t_c = closed.breakpoints[0]
    assert closed.value(t_c) == pytest.approx(J * math.cos(K0), abs=1e-9)
    # continuity of value across the switch
    d = 1e-7
    assert abs(closed.value(t_c - d) - closed.value(t_c + d)) < 1e-3


@pytest.mark.parametrize("name,order", [("uqa", 1), ("uq2", 2)])
def test_crossing_branch_constants_agree(crossing_pair, name, order):
    closed = crossing_pair[name][1]
    t_c = closed.breakpoints[0]
    checks = []
    for window in ((0.0, t_c), (t_c, 50.0)):
        assert protocols.residual_check(closed, UQ, order, window=window) <= (1e-6 if order == 1 else 1e-4)
        a, b = window
        t = np.linspace(a + 0.05 * (b - a), b - 0.05 * (b - a), 401)
        lam = closed.value(t)
        q = closed.derivative(t) * UQ.coupling(lam) / UQ.gap(lam) ** 2
        lhs = np.abs(q) if order == 1 else np.abs(np.gradient(q, t)) / UQ.gap(lam)
        checks.append(np.median(lhs))
    assert checks[0] == pytest.approx(checks[1], rel=1e-6 if order == 1 else 1e-4)
    expected = closed.rate_constant
    assert checks[0] == pytest.approx(expected, rel=1e-6 if order == 1 else 1e-4)


def test_closed_form_range_checks():
    with pytest.raises(ValueError):
        protocols.ti_fqa(N, J, 3.0, 0.5, 0.0, 1.0)
    with pytest.raises(ValueError):
        protocols.ti_uqa(N, J, 3.0, 1.2, 0.0, 1.0)
    with pytest.raises(ValueError):
        protocols.ti_uq2(N, J, 0.5, 0.2, 0.0, 1.0)


def test_residual_check_examples():
    lin = protocols.linear(2.0, 0.2, 0.0, 50.0)
    assert protocols.residual_check(lin, UQ, 1) > 0.01
    assert protocols.residual_check(protocols.fqa(FQ, 3.0, 1.2, 0.0, 3.0), FQ, 1) <= 1e-6
    assert protocols.residual_check(protocols.ti_fqa(N, J, 3.0, 1.2, 0.0, 3.0), FQ, 1) <= 1e-6
    assert protocols.residual_check(protocols.ho_fqa(1.0, 2.0, 0.0, 3.0), HO, 1) <= 1e-6
    with pytest.raises(ValueError):
        protocols.residual_check(lin, UQ, 3)


def test_uqa_derivative_diverges_at_gap_minimum(crossing_pair):
    generic = crossing_pair["uqa"][0]
    assert math.isinf(generic.derivative(generic.breakpoints[0])) or abs(generic.derivative(generic.breakpoints[0])) > 1e3


def test_singular_channel_is_rejected():
    bad = protocols.GapChannel(lambda x: np.abs(x), lambda x: np.ones_like(x))
    with pytest.raises(SynthesisError):
        protocols.fqa(bad, -1.0, 1.0, 0.0, 1.0)
    with pytest.raises(SynthesisError):
        protocols.fq2(bad, -1.0, 1.0, 0.0, 1.0)


def test_fq2_rejects_vanishing_coupling():
    flat = protocols.GapChannel(lambda x: np.ones_like(x), lambda x: np.abs(x))
    with pytest.raises(SynthesisError):
        protocols.fq2(flat, -1.0, 1.0, 0.0, 1.0)


def test_coincident_endpoints_rejected():
    with pytest.raises(SynthesisError):
        protocols.fqa(FQ, 2.0, 2.0, 0.0, 1.0)
    with pytest.raises(SynthesisError):
        protocols.ho_fq2(1.0, 1.0, 0.0, 1.0)


def test_iie_boundary_and_identity():
    s = protocols.iie(1.0, 1.0, 2.0, 0.0, 3.0)
    assert s.value(0.0) == pytest.approx(1.0, abs=1e-14)
    assert s.value(3.0) == pytest.approx(2.0, abs=1e-12)
    same = protocols.iie(1.0, 1.5, 1.5, 0.0, 3.0)
    np.testing.assert_allclose(same.value(np.linspace(0, 3, 11)), 1.5, rtol=1e-15)


def test_iie_derivative_matches_finite_difference():
    s = protocols.iie(1.0, 1.0, 2.0, 0.0, 3.0)
    t = np.linspace(0.1, 2.9, 15)
    h = 1e-6
    np.testing.assert_allclose(s.derivative(t), (s.value(t + h) - s.value(t - h)) / (2 * h), atol=1e-7)


def test_iie_trap_inversion_is_rejected():
    with pytest.raises(SynthesisError):
        protocols.iie(1.0, 1.0, 2.0, 0.0, 0.2)


@pytest.mark.parametrize("tau", [1.0, 3.0])
def test_iie_stays_trapping_at_unit_time_scales(tau):
    for w_i, w_f in ((1.0, 2.0), (2.0, 1.0)):
        protocols.iie(1.0, w_i, w_f, 0.0, tau)


def test_closed_form_derivatives_match_finite_difference():
    h = 1e-6
    for s in (protocols.ti_fqa(N, J, 3.0, 1.2, 0.0, 3.0), protocols.ho_fq2(1.0, 2.0, 0.0, 3.0),
              protocols.ho_fq2(2.0, 1.0, 0.0, 3.0), protocols.ti_uqa(N, J, 2.0, 0.2, 0.0, 50.0),
              protocols.ti_uq2(N, J, 2.0, 0.2, 0.0, 50.0)):
        t = np.linspace(s.t_i + 0.01 * s.tau, s.t_f - 0.01 * s.tau, 23)
        t = t[np.all(np.abs(t[:, None] - np.array(s.breakpoints or [np.inf])) > 0.02 * s.tau, axis=1)]
        fd = (s.value(t + h) - s.value(t - h)) / (2 * h)
        np.testing.assert_allclose(s.derivative(t), fd, rtol=1e-5, atol=1e-7)


def test_schedule_csv_export(tmp_path):
    s = protocols.ho_fqa(1.0, 2.0, 0.0, 3.0)
    path = write_schedule_csv(tmp_path / "s.csv", s, 11)
    rec = read_record(path)
    assert rec.columns == ["t", "lambda", "dlambda_dt"]
    data = rec.as_array()
    np.testing.assert_array_equal(data[:, 1], s.value(np.linspace(0.0, 3.0, 11)))
    assert rec.metadata["flavor"] == "FQA"

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dwsynapse.device import (DeviceConfig, ModelUnfitted, ProgrammingPulse, SynapseState,
                              apply_pulse, conductance, conductance_at, conductance_columns,
                              full_switch_current, programming_energy, pulse_delta_w,
                              transmit_spike)
from dwsynapse.dwall import CompactModel
from dwsynapse.magcore import ConfigError

CM = CompactModel(mobility=5e-11, J_th=0.0)
CM_TH = CompactModel(mobility=5e-11, J_th=2e10)
CFG = DeviceConfig()


def test_conductance_endpoints():
    assert conductance(SynapseState(0.0, CFG)) == CFG.g_ap_max_S
    assert conductance(SynapseState(CFG.w_mtj_m, CFG)) == CFG.g_p_max_S
    c = DeviceConfig(g_dw_S=1e-8)
    assert conductance(SynapseState(0.0, c)) == pytest.approx(1e-6 + 1e-8, rel=1e-15)


@settings(max_examples=100)
@given(st.floats(0, 1), st.floats(1e-7, 1e-5), st.floats(0.01, 0.99), st.floats(0, 1e-7),
       st.floats(10e-9, 500e-9))
def test_conductance_affine(frac, g_p, ratio, g_dw, width):
    cfg = DeviceConfig(g_p_max_S=g_p, g_ap_max_S=g_p * ratio, g_dw_S=g_dw, w_mtj_m=width)
    w = frac * width
    g = conductance(SynapseState(w, cfg))
    g0 = conductance(SynapseState(0.0, cfg))
    g1 = conductance(SynapseState(width, cfg))
    line = g0 + (g1 - g0) * w / width
    assert abs(g - line) <= 1e-12 * abs(line)
    assert abs(conductance_columns(SynapseState(w, cfg)) - g) <= 1e-12 * g


def test_conductance_array():
    w = np.linspace(0, CFG.w_mtj_m, 7)
    g = conductance_at(w, CFG)
    assert g.shape == (7,)
    assert g[3] == pytest.approx(1.5e-6)


def test_state_bounds():
    with pytest.raises(ValueError):
        SynapseState(-1e-9, CFG)
    with pytest.raises(ValueError):
        SynapseState(CFG.w_mtj_m * 1.01, CFG)


def test_device_config_validation():
    with pytest.raises(ConfigError):
        DeviceConfig(g_p_max_S=1e-6, g_ap_max_S=2e-6)
    with pytest.raises(ConfigError):
        DeviceConfig.from_dict({"g_p": 1.0})
    assert DeviceConfig.from_dict(CFG.to_dict()) == CFG


def test_positive_current_grows_parallel_domain():
    s = SynapseState.midrange(CFG, CM)
    new, dw, clamped = apply_pulse(s, ProgrammingPulse(50e-6, 10e-9))
    assert dw > 0 and new.w > s.w and not clamped
    assert dw == pytest.approx(5e-11 * (50e-6 / 2e-15) * 10e-9, rel=1e-12)


@given(st.floats(-200e-6, 200e-6).filter(lambda i: abs(i) > 1e-9), st.floats(1e-9, 20e-9))
def test_reversal_exact_antisymmetry(i, tau):
    base = pulse_delta_w(CM_TH, ProgrammingPulse(i, tau))
    assert pulse_delta_w(CM_TH, ProgrammingPulse(-i, tau)) == -base
    assert pulse_delta_w(CM_TH, ProgrammingPulse(i, tau, field_dir=-1)) == -base
    assert pulse_delta_w(CM_TH, ProgrammingPulse(-i, tau, field_dir=-1)) == base


def test_below_threshold_no_motion():
    s = SynapseState.midrange(CFG, CM_TH)
    new, dw, _ = apply_pulse(s, ProgrammingPulse(0.9 * 2e10 * 2e-15, 10e-9))
    assert dw == 0.0 and new.w == s.w


@pytest.mark.parametrize("current,rail", [(1.0, 1), (-1.0, 0)])
def test_clamp_at_rails(current, rail):
    s = SynapseState.midrange(CFG, CM)
    new, dw, clamped = apply_pulse(s, ProgrammingPulse(current, 10e-9))
    assert clamped and new.clamp_count == 1
    assert new.w == rail * CFG.w_mtj_m
    assert dw == new.w - s.w


def test_model_required():
    s = SynapseState.midrange(CFG)
    with pytest.raises(ModelUnfitted):
        apply_pulse(s, ProgrammingPulse(1e-6, 1e-9))
    with pytest.raises(ModelUnfitted):
        full_switch_current(s, 10e-9)


def test_pulse_validation():
    with pytest.raises(ValueError):
        ProgrammingPulse(1e-6, 0.0)
    with pytest.raises(ValueError):
        ProgrammingPulse(1e-6, 1e-9, field_dir=0)


def test_programming_energy():
    assert programming_energy(ProgrammingPulse(200e-6, 10e-9), 1.0) == 2e-12
    assert programming_energy(ProgrammingPulse(-200e-6, 10e-9), 1.0) == 2e-12


def test_full_switch_current_sweeps_whole_width():
    s = SynapseState(0.0, CFG, CM_TH)
    i = full_switch_current(s, 10e-9)
    new, dw, clamped = apply_pulse(s, ProgrammingPulse(i, 10e-9))
    assert dw == pytest.approx(CFG.w_mtj_m, rel=1e-12)


def test_transmit_spike():
    s = SynapseState(0.25 * CFG.w_mtj_m, CFG, CM)
    tx = transmit_spike(s, 0.1, 1e-6)
    assert tx.current == pytest.approx(0.1 * 1.25e-6, rel=1e-15)
    assert tx.charge == pytest.approx(tx.current * 1e-6)
    assert tx.above_threshold  # zero threshold: any read current moves the wall
    s_th = SynapseState(0.25 * CFG.w_mtj_m, CFG, CM_TH)
    assert not transmit_spike(s_th, 0.1, 1e-6).above_threshold
    tx_r = transmit_spike(s, 0.1, 1e-6, access_resistance=1e5)
    assert tx_r.current == pytest.approx(0.1 / (1 / 1.25e-6 + 1e5))


def test_spike_hm_density():
    s = SynapseState.midrange(DeviceConfig(hm_spike_fraction=0.5), CM)
    tx = transmit_spike(s, 0.2, 1e-6)
    assert tx.hm_current_density == pytest.approx(0.5 * 0.2 * 1.5e-6 / 2e-15)
    assert math.isfinite(tx.hm_current_density)

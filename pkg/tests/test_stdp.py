import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dwsynapse.device import (DeviceConfig, ModelUnfitted, ProgrammingPulse, SynapseState,
                              conductance, programming_energy)
from dwsynapse.dwall import CompactModel
from dwsynapse.magcore import ConfigError
from dwsynapse.stdp import (Amplitudes, StdpConfig, fit_branch, invert_amplitudes,
                            sample_event, stdp_curve, v_pre_waveform, write_curve_csv,
                            write_waveform_csv)

CM = CompactModel(mobility=5e-11, J_th=0.0)
CM_TH = CompactModel(mobility=5e-11, J_th=1e10)
DEV = DeviceConfig()
CFG = StdpConfig(a_plus=0.4, a_minus=0.3, tau_plus=15e-3, tau_minus=25e-3)
DTS = np.linspace(-0.1, 0.1, 81)


def syn(cm=CM):
    return SynapseState.midrange(DEV, cm)


def test_config_validation():
    with pytest.raises(ConfigError):
        StdpConfig(tau_plus=50e-3)  # window shorter than 3 tau
    with pytest.raises(ConfigError):
        StdpConfig(a_plus=1.5)
    with pytest.raises(ConfigError):
        StdpConfig.from_dict({"tau": 1.0})
    assert StdpConfig.from_dict(CFG.to_dict()) == CFG


def test_amplitude_inversion_peak():
    curve = dict(stdp_curve(CFG, syn(), [0.0, -1e-12]))
    assert curve[0.0] == pytest.approx(0.4, rel=1e-12)
    assert curve[-1e-12] == pytest.approx(-0.3, rel=1e-9)


def test_amplitudes_need_model():
    with pytest.raises(ModelUnfitted):
        invert_amplitudes(CFG, None, DEV)


def test_waveform_shape():
    amps = Amplitudes(1.0, 0.5)
    assert v_pre_waveform(CFG, -1e-3, amps) == 0.0
    assert v_pre_waveform(CFG, 0.2001, amps) == 0.0
    assert v_pre_waveform(CFG, 0.1, amps) == 1.0
    assert v_pre_waveform(CFG, 0.1 - 1e-15, amps) == pytest.approx(-0.5)
    assert v_pre_waveform(CFG, 0.1 + 15e-3, amps) == pytest.approx(math.exp(-1))
    v = v_pre_waveform(CFG, np.linspace(0, 0.2, 11), amps)
    assert v.shape == (11,)
    assert np.all(v[:5] < 0) and np.all(v[5:] > 0)


def test_sign_rule_and_monotone():
    curve = stdp_curve(CFG, syn(), DTS)
    for dt, dg in curve:
        if dt >= 0:
            assert dg > 0
        else:
            assert dg < 0
    pos = [abs(g) for dt, g in curve if dt >= 0]
    neg = [abs(g) for dt, g in reversed(curve) if dt < 0]
    assert np.all(np.diff(pos) < 0)
    assert np.all(np.diff(neg) < 0)


def test_exponential_fit_recovers_taus():
    curve = stdp_curve(CFG, syn(), DTS)
    a_p, tau_p, r2 = fit_branch(curve, +1)
    a_m, tau_m, _ = fit_branch(curve, -1)
    assert tau_p == pytest.approx(15e-3, rel=1e-6)
    assert tau_m == pytest.approx(25e-3, rel=1e-6)
    assert a_p == pytest.approx(0.4, rel=1e-6)
    assert r2 == pytest.approx(1.0, abs=1e-9)


def test_threshold_distorts_then_compensation_restores():
    plain = stdp_curve(CFG, syn(CM_TH), DTS)
    assert any(g == 0.0 for _, g in plain)  # tails fall below threshold
    comp_cfg = StdpConfig(**{**CFG.to_dict(), "threshold_compensation": True})
    comp = stdp_curve(comp_cfg, syn(CM_TH), DTS)
    _, tau_p, _ = fit_branch(comp, +1)
    _, tau_m, _ = fit_branch(comp, -1)
    assert tau_p == pytest.approx(15e-3, rel=1e-6)
    assert tau_m == pytest.approx(25e-3, rel=1e-6)


def test_odd_symmetry():
    sym = StdpConfig(a_plus=0.3, a_minus=0.3)
    dts = np.arange(1, 41) * 2.5e-3
    pos = stdp_curve(sym, syn(), dts)
    neg = stdp_curve(sym, syn(), -dts)
    for (_, gp), (_, gn) in zip(pos, neg):
        assert gp == pytest.approx(-gn, rel=1e-12)


def test_field_reversal_matches_current_reversal():
    fr = StdpConfig(**{**CFG.to_dict(), "field_reversal": True})
    a = stdp_curve(CFG, syn(), DTS)
    b = stdp_curve(fr, syn(), DTS)
    for (_, ga), (_, gb) in zip(a, b):
        assert ga == pytest.approx(gb, rel=1e-12, abs=1e-18)


def test_outside_window_no_change():
    s = syn()
    ev, new = sample_event(CFG, s, 0.0, 0.15)
    assert new is s and ev.delta_w == 0.0 and ev.energy == 0.0


@given(st.floats(0.0, 1e3), st.floats(-0.1, 0.1))
def test_coincident_and_shifted_pairs(t0, dt):
    """The response depends on t_post - t_pre only, even at large absolute times."""
    a, _ = sample_event(CFG, syn(), t0, t0 + dt)
    b, _ = sample_event(CFG, syn(), 0.0, a.delta_t)
    assert a.delta_w == pytest.approx(b.delta_w, rel=1e-12, abs=1e-20)
    if a.delta_t == 0.0:
        assert a.delta_w > 0


def test_event_energy():
    ev, _ = sample_event(CFG, syn(), 0.0, 5e-3)
    assert ev.energy == pytest.approx(abs(ev.sampled_I) * CFG.t_sample * CFG.v_supply,
                                      rel=1e-15)
    assert ev.energy > 0


def test_event_conductance_change_matches_curve():
    s = syn()
    ev, new = sample_event(CFG, s, 0.0, 5e-3)
    curve = dict(stdp_curve(CFG, s, [5e-3]))
    assert (conductance(new) - conductance(s)) / DEV.g_range == pytest.approx(curve[5e-3])


def test_fit_needs_points():
    with pytest.raises(ValueError):
        fit_branch([(1e-3, 0.1), (2e-3, 0.05)], +1)


def test_csv_writers(tmp_path):
    curve = stdp_curve(CFG, syn(), DTS[:5])
    write_curve_csv(tmp_path / "c.csv", curve)
    write_waveform_csv(tmp_path / "w.csv", CFG, invert_amplitudes(CFG, CM, DEV), n=11)
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == "delta_t_s,delta_g_over_range"
    lines = (tmp_path / "w.csv").read_text().splitlines()
    assert lines[0] == "offset_s,v_pre_V" and len(lines) == 12


def test_energy_scale_of_peak_pulse():
    amps = invert_amplitudes(CFG, CM, DEV)
    i_peak = amps.v_pot / DEV.r_prog_ohm
    e = programming_energy(ProgrammingPulse(i_peak, CFG.t_sample), CFG.v_supply)
    assert e == pytest.approx(i_peak * CFG.t_sample)

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from msscatter import checks
from msscatter import remainders as rm
from msscatter import spectral as sp


@pytest.fixture(scope="module")
def profile():
    return checks.default_profile()


@pytest.mark.parametrize("t", [2.0, 8.0])
def test_two_routes_agree(profile, t):
    s = rm.remainder_sample(profile, t)
    assert s.cross_defect_R1 < 1e-5
    assert s.cross_defect_R2 < 1e-5
    assert s.norms["R11_L2"] > 0 and s.norms["R2_def_L2"] > 0


def test_frame_norms_match_physical_norms(profile):
    # MD is an isometry of L2 and D0(t) scales L2 by t^{3/2}
    t = 4.0
    s = rm.remainder_sample(profile, t)
    n = rm.frame_norms(profile, t)
    assert n["R11_L2"] == pytest.approx(s.norms["R11_L2"], rel=1e-10)
    assert n["R12_L2"] == pytest.approx(s.norms["R12_L2"], rel=1e-10)
    assert n["R2_L2"] == pytest.approx(s.norms["R2_closed_L2"], rel=1e-10)


def test_correct_phase_cancels_long_range_term(profile):
    for t in (3.0, 100.0):
        fr = rm.frame_remainders(profile, t, phased=True)
        scale = max(np.abs(profile.long_range * fr["frame"].W / t).max(), np.abs(fr["R11"]).max(),
                    np.abs(fr["R12"]).max())
        assert np.abs(fr["R1"] - fr["R11"] - fr["R12"]).max() < 1e-13 * scale
        # without the phase the long-range term survives
        bare = rm.frame_remainders(profile, t, phased=False)
        assert rm.relative_l2(bare["R1"], bare["R11"] + bare["R12"]) > 1e-6


def test_remainder_is_leray_projected(profile):
    S2 = rm.frame_remainders(profile, 10.0)["S2"]
    assert sp.VectorField(profile.grid, S2).divergence_defect() < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.floats(-3.0, -0.5), st.floats(-1.0, 2.0), st.floats(0.1, 10.0))
def test_decay_fit_recovers_power_log_law(alpha, beta, c):
    t = np.geomspace(10, 1000, 17)
    tr = rm.DecayTrace("x", t, c * t**alpha * (1 + np.log(t)) ** beta)
    f = rm.decay_fit(tr)
    assert f.exponent == pytest.approx(alpha, abs=1e-8)
    assert f.log_power == pytest.approx(beta, abs=1e-7)
    assert f.residual < 1e-10
    assert f.n == 17


def test_decay_fit_needs_span_and_positive_values():
    t = np.geomspace(10, 100, 20)
    with pytest.raises(ValueError):
        rm.decay_fit(rm.DecayTrace("short", t, t**-2))
    t = np.geomspace(10, 1000, 20)
    with pytest.raises(ValueError):
        rm.decay_fit(rm.DecayTrace("neg", t, -(t**-2)))
    with pytest.raises(ValueError):
        rm.decay_fit(rm.DecayTrace("window", t, t**-2), t_min=100)


def test_trace_and_fit_writers(tmp_path):
    t = np.geomspace(10, 1000, 9)
    tr = rm.DecayTrace("R11_L2", t, t**-2.0)
    rm.write_traces_csv(tmp_path / "tr.csv", [tr])
    rows = (tmp_path / "tr.csv").read_text().splitlines()
    assert rows[0] == "t,name,value,route" and len(rows) == 10
    assert float(rows[1].split(",")[2]) == t[0] ** -2.0
    rm.write_fits_json(tmp_path / "fits.json", {"R11_L2": rm.decay_fit(tr)})
    d = json.loads((tmp_path / "fits.json").read_text())
    assert d["R11_L2"]["exponent"] == pytest.approx(-2.0)


def test_fit_report_rows():
    t = np.geomspace(10, 1000, 17)
    traces = [rm.DecayTrace("R11_L2", t, t**-2.0 * np.log(t)), rm.DecayTrace("R2_L2", t, t**-1.0)]
    rows = checks.fit_report(traces)
    assert rows[0]["pass"] and not rows[1]["pass"]
    assert rows[0]["expected"] == list(checks.EXPECTED_SLOPES["R11_L2"])


def test_box_and_time_derivative_of_A1(profile):
    assert rm.check_box_A1(profile.w, profile.grid, nodes=48) <= 1e-3
    assert rm.check_dt_A1(profile.w, profile.grid, nodes=48) <= 1e-4

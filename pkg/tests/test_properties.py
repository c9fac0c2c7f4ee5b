import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tcsr.core import Constant, Pulse, SystemConfig
from tcsr.experiments import Row, ScanResult, to_csv
from tcsr.metrics import eigenstate_superradiance_static, photon_fidelity

finite = st.floats(-8, 8, allow_nan=False)


@given(n=st.integers(1, 60), g=st.floats(0.01, 5))
def test_homogeneous_es(n, g):
    cfg = SystemConfig(np.zeros(n), Constant(g))
    assert eigenstate_superradiance_static(cfg).value == pytest.approx(n / 2, abs=1e-9)


@given(freqs=st.lists(finite, min_size=1, max_size=8), g=st.floats(0, 3),
       gamma=st.floats(0, 2), pulse=st.lists(finite, min_size=1, max_size=10))
def test_fidelity_is_a_probability(freqs, g, gamma, pulse):
    cfg = SystemConfig(freqs, Constant(g), 1.0, gamma)
    f = photon_fidelity(cfg, Pulse(5.0, pulse))
    assert -1e-12 <= f.value <= 1 + 1e-9
    assert f.budget == pytest.approx(1.0, abs=1e-6)


@given(freqs=st.lists(finite, min_size=2, max_size=6), seed=st.integers(0, 100))
def test_fidelity_is_permutation_invariant(freqs, seed):
    perm = np.random.default_rng(seed).permutation(len(freqs))
    pulse = Pulse(5.0, [1.0, -1.0, 0.5])
    a = photon_fidelity(SystemConfig(freqs, Constant(0.7), 1.0, 0.3), pulse).value
    b = photon_fidelity(SystemConfig(np.array(freqs)[perm], Constant(0.7), 1.0, 0.3), pulse).value
    assert a == pytest.approx(b, abs=1e-9)


@given(t=st.floats(0, 20), vals=st.lists(finite, min_size=1, max_size=12))
def test_pulse_lookup(t, vals):
    p = Pulse(10.0, vals)
    v = p.value_at(t)
    assert v == 0.0 if t >= 10.0 else v in vals


row = st.builds(Row, figure=st.sampled_from(["fig1c", "fig2"]), key=st.text(max_size=8),
                N=st.one_of(st.none(), st.integers(1, 100)), seed=st.integers(0, 2 ** 63),
                metric=st.text(min_size=1, max_size=8),
                value=st.floats(allow_infinity=False), std=st.floats(0, 1e3),
                stderr=st.floats(0, 1e3), count=st.integers(0, 30), error=st.text(max_size=10))


@given(rows=st.lists(row, max_size=6))
def test_json_sidecar_reproduces_csv(rows):
    res = ScanResult(rows, {"tool": "tcsr"})
    assert to_csv(ScanResult.from_json(res.to_json())) == to_csv(res)

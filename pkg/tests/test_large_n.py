import numpy as np
import pytest
from scipy.integrate import solve_ivp

from tcsr.core import Pulse
from tcsr.engine import HorizonPolicy
from tcsr.errors import InvalidConfigError
from tcsr.large_n import (LargeNParams, effective_fidelity, effective_run, evolve_effective,
                          improvement_scan, subradiant_occupation)
from tcsr.pulse_opt import OptimizationOptions

from conftest import FIXED


def reference(params, pulse, t_end):
    """Independent real-valued integration of the coupled amplitudes and the
    excitation they receive from the drive."""
    G, D, k = params.G, params.delta0, params.kappa

    def rhs(t, z):
        a, b = z[0] + 1j * z[1], z[2] + 1j * z[3]
        s = np.exp(-D * t)
        da = -(1j * pulse.value_at(t) + k / 2) * a - G * b - 1j * G * s
        db = G * a - D * b
        inj = 2 * np.real(np.conj(a) * (-1j * G * s))
        return [da.real, da.imag, db.real, db.imag, inj, k * abs(a) ** 2, 2 * D * abs(b) ** 2]

    edges = sorted(set([t for t in pulse.edges if t < t_end] + [t_end]))
    z = np.zeros(7)
    for a, b in zip(edges[:-1], edges[1:]):
        z = solve_ivp(rhs, (a, b), z, method="DOP853", rtol=1e-11, atol=1e-13).y[:, -1]
    return dict(injected=z[4], fidelity=z[5], subradiant=z[6],
                residual=z[0] ** 2 + z[1] ** 2 + z[2] ** 2 + z[3] ** 2)


def test_params_validation():
    for bad in (dict(G=-1, delta0=1), dict(G=1, delta0=-1), dict(G=1, delta0=1, kappa=0),
                dict(G=np.nan, delta0=1)):
        with pytest.raises(InvalidConfigError):
            LargeNParams(**bad)


def test_zero_coupling_stays_dark():
    p = LargeNParams(0.0, 1.0)
    st = evolve_effective(p, Pulse(5.0, [1.0, -2.0]), 10.0)
    assert np.max(np.abs(st.alpha)) == 0 and np.max(np.abs(st.beta)) == 0
    assert effective_fidelity(p, Pulse.zeros()) == 0.0


def test_delta_zero_laplace_limit():
    # with no broadening alpha(s) = -iG / (s^2 + kappa s / 2 + G^2), whose
    # squared integral gives kappa * int |alpha|^2 = 1 for any G
    for G in (1 / 3, 1.0, 3.0):
        r = effective_run(LargeNParams(G, 0.0), Pulse.zeros(), HorizonPolicy(400.0))
        assert r.fidelity == pytest.approx(1.0, abs=1e-6)
        assert r.subradiant == 0.0


@pytest.mark.parametrize("G", [1 / 3, 1.0, 3.0])
@pytest.mark.parametrize("d0", [0.1, 1.0, 5.0])
def test_budget_against_independent_integration(G, d0):
    rng = np.random.default_rng(int(10 * G + d0))
    pulse = Pulse(10.0, rng.normal(0, 2, 25))
    p = LargeNParams(G, d0)
    r = effective_run(p, pulse, FIXED, tol=1e-10)
    ref = reference(p, pulse, FIXED.max_time)
    assert r.fidelity == pytest.approx(ref["fidelity"], abs=1e-7)
    assert r.subradiant == pytest.approx(ref["subradiant"], abs=1e-7)
    assert r.fidelity + r.subradiant + r.residual == pytest.approx(ref["injected"], abs=1e-6)


def test_linearity_in_drive():
    p = LargeNParams(2.0, 1.5)
    pulse = Pulse(10.0, np.linspace(-3, 3, 20))
    a = effective_run(p, pulse, FIXED)
    b = effective_run(p, pulse, FIXED, drive=3.0)
    for name in ("fidelity", "subradiant", "residual"):
        assert getattr(b, name) == pytest.approx(9 * getattr(a, name), rel=1e-8, abs=1e-14)


def test_fidelity_decreases_with_broadening():
    vals = [effective_fidelity(LargeNParams(1.0, d), Pulse.zeros()) for d in (0.1, 1, 10, 100)]
    assert all(x > y for x, y in zip(vals, vals[1:]))
    assert vals[-1] < 0.01
    assert subradiant_occupation(LargeNParams(1.0, 0.0), Pulse.zeros()) == 0.0


def test_improvement_scan_shape_small():
    opts = OptimizationOptions(max_iters=60)
    cells = improvement_scan([3.0], [1e-4, 2.0, 50.0], opts)
    r = {c.delta0: c.ratio for c in cells}
    assert r[1e-4] == pytest.approx(1.0, abs=1e-3)
    assert r[2.0] > 1.5
    assert 1 - 1e-6 <= r[50.0] < r[2.0]
    assert all(c.ratio >= 1 - 1e-6 for c in cells)
    with pytest.raises(ValueError):
        improvement_scan([], [1.0])

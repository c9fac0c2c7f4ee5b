import math

import numpy as np
import pytest
import scipy.linalg as sla

from tcsr import kernels
from tcsr.core import (Constant, Pulse, SinglePhotonState, SqrtScaled, SystemConfig,
                       effective_hamiltonian, evolve, propagator, symmetric_state)
from tcsr.errors import InvalidConfigError

from conftest import random_config, random_pulse


def dense_propagator(cfg, pulse, T):
    """Product of matrix exponentials over the constant pieces."""
    u = np.eye(cfg.n_emitters + 1, dtype=complex)
    edges = [t for t in pulse.edges if t < T] + [T]
    for a, b in zip(edges[:-1], edges[1:]):
        h = effective_hamiltonian(cfg, pulse, 0.5 * (a + b))
        u = sla.expm(-1j * h * (b - a)) @ u
    return u


@pytest.mark.parametrize("bad", [
    dict(emitter_freqs=[]),
    dict(emitter_freqs=[np.nan]),
    dict(emitter_freqs=[0.0], kappa=0.0),
    dict(emitter_freqs=[0.0], kappa=-1.0),
    dict(emitter_freqs=[0.0], gamma=-0.1),
    dict(emitter_freqs=[0.0], gamma=np.inf),
    dict(emitter_freqs=[0.0], coupling=Constant(-1.0)),
    dict(emitter_freqs=[0.0], coupling=Constant(np.nan)),
])
def test_config_rejects_invalid(bad):
    with pytest.raises(InvalidConfigError):
        SystemConfig(**bad)


def test_config_is_immutable_and_comparable():
    cfg = SystemConfig([0.5, -0.5], SqrtScaled(2.0), 1.0, 0.1)
    assert cfg.g == pytest.approx(2.0 / math.sqrt(2))
    with pytest.raises(ValueError):
        cfg.emitter_freqs[0] = 3.0
    assert cfg == cfg.replace()
    assert cfg != cfg.replace(gamma=0.2)


def test_pulse_piecewise_lookup():
    p = Pulse(2.0, [1.0, -3.0])
    assert p.value_at(0.0) == 1.0
    assert p.value_at(0.999) == 1.0
    assert p.value_at(1.0) == -3.0
    assert p.value_at(2.0) == 0.0
    assert p.value_at(50.0) == 0.0
    with pytest.raises(ValueError):
        p.value_at(-1.0)
    with pytest.raises(InvalidConfigError):
        Pulse(0.0, [1.0])
    with pytest.raises(InvalidConfigError):
        Pulse(1.0, [np.inf])


def test_effective_hamiltonian_structure(rng):
    cfg = random_config(rng, 6, gamma=0.3)
    h = effective_hamiltonian(cfg, Pulse(1.0, [0.7]), 0.5)
    herm = 0.5 * (h + h.conj().T)
    anti = 0.5j * (h - h.conj().T)
    np.testing.assert_allclose(anti, np.diag([0.5] + [0.15] * 6), atol=1e-15)
    assert herm[0, 0] == pytest.approx(0.7)
    np.testing.assert_allclose(np.diag(herm)[1:], cfg.emitter_freqs)
    np.testing.assert_allclose(herm[0, 1:], cfg.g)


def test_symmetric_state():
    s = symmetric_state(4)
    assert s.norm2 == pytest.approx(1.0)
    assert s.cavity == 0
    np.testing.assert_allclose(s.emitters, 0.5)


def test_evolve_matches_dense_exponential(rng):
    for _ in range(5):
        cfg = random_config(rng, int(rng.integers(1, 8)))
        pulse = random_pulse(rng, m=7, T=3.0)
        y0 = symmetric_state(cfg.n_emitters)
        tr = evolve(cfg, pulse, y0, 0.0, 4.5, tol=1e-11)
        ref = dense_propagator(cfg, pulse, 4.5) @ y0.amplitudes
        np.testing.assert_allclose(tr.states[-1].amplitudes, ref, atol=1e-9)
        assert tr.times[-1] == pytest.approx(4.5)


def test_propagator_matches_dense_exponential(rng):
    cfg = random_config(rng, 5)
    pulse = random_pulse(rng, m=10, T=2.0)
    np.testing.assert_allclose(propagator(cfg, pulse, tol=1e-11),
                               dense_propagator(cfg, pulse, 2.0), atol=1e-9)


def test_norm_is_non_increasing_and_coherent_evolution_is_unitary(rng):
    cfg = random_config(rng, 5, gamma=0.4)
    pulse = random_pulse(rng)
    tr = evolve(cfg, pulse, symmetric_state(5), 0.0, 15.0)
    norms = np.array([s.norm2 for s in tr.states])
    assert np.all(np.diff(norms) <= 1e-12)
    tr = evolve(cfg, pulse, symmetric_state(5), 0.0, 15.0, coherent=True)
    np.testing.assert_allclose([s.norm2 for s in tr.states], 1.0, atol=1e-8)
    u = propagator(cfg, pulse, coherent=True)
    np.testing.assert_allclose(u.conj().T @ u, np.eye(6), atol=1e-8)


def test_g_zero_keeps_cavity_empty(rng):
    cfg = SystemConfig(rng.uniform(-3, 3, 4), Constant(0.0), 1.0, 0.2)
    tr = evolve(cfg, random_pulse(rng), symmetric_state(4), 0.0, 5.0)
    assert np.max(np.abs(tr.amplitudes()[:, 0])) == 0.0


def test_sample_times_are_hit(rng):
    cfg = random_config(rng, 3)
    tr = evolve(cfg, Pulse.zeros(), symmetric_state(3), 0.0, 12.0, t_eval=[0.123, 11.5])
    for t in (0.123, 11.5):
        assert np.min(np.abs(tr.times - t)) < 1e-12


def test_invalid_evolution_requests(rng):
    cfg = random_config(rng, 3)
    with pytest.raises(ValueError):
        evolve(cfg, Pulse.zeros(), symmetric_state(3), 2.0, 1.0)
    with pytest.raises(InvalidConfigError):
        evolve(cfg, Pulse.zeros(), SinglePhotonState([1.0, 0.0]), 0.0, 1.0)


def test_backends_agree(rng):
    fp, _ = kernels.get_backend("python")
    try:
        fc, _ = kernels.get_backend("cython")
    except ImportError:
        pytest.skip("compiled extension not built")
    cfg = random_config(rng, 9)
    from tcsr.core import arrow_problem

    prob = arrow_problem(cfg)
    args = (prob.diag(0.8), prob.u, prob.v, prob.weights, prob.y0, 0.0, 3.0, 1e-10, 1e-10, 0.0, False)
    a, b = fp(*args), fc(*args)
    np.testing.assert_allclose(a[0], b[0], atol=1e-13)
    assert a[1] == pytest.approx(b[1], abs=1e-13)
    assert a[4] == b[4]

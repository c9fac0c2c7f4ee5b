"""Model types and single-excitation dynamics of the modulated Tavis-Cummings model.

Basis convention for the one-excitation sector: index 0 is the cavity
photon, index ``i`` (1..N) is emitter ``i`` excited. The ground state has
no amplitude in this sector. Frequencies and rates are in units of the
cavity decay rate, times in units of its inverse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .engine import ArrowProblem
from .errors import IntegrationError, InvalidConfigError

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class Constant:
    """Emitter-cavity coupling independent of the ensemble size."""

    g: float

    def value(self, n):
        return float(self.g)


@dataclass(frozen=True)
class SqrtScaled:
    """Coupling ``G / sqrt(N)`` that keeps the collective coupling fixed."""

    G: float

    def value(self, n):
        return float(self.G) / math.sqrt(n)


@dataclass(frozen=True, eq=False)
class SystemConfig:
    """Emitter frequencies, coupling rule and decay rates."""

    emitter_freqs: np.ndarray
    coupling: Constant | SqrtScaled = field(default_factory=lambda: Constant(1.0))
    kappa: float = 1.0
    gamma: float = 0.0

    def __post_init__(self):
        freqs = np.array(self.emitter_freqs, dtype=float).ravel()
        freqs.setflags(write=False)
        object.__setattr__(self, "emitter_freqs", freqs)
        if freqs.size < 1:
            raise InvalidConfigError("at least one emitter is required")
        if not np.all(np.isfinite(freqs)):
            raise InvalidConfigError("emitter frequencies must be finite")
        if not (math.isfinite(self.kappa) and self.kappa > 0):
            raise InvalidConfigError(f"kappa must be positive, got {self.kappa}")
        if not (math.isfinite(self.gamma) and self.gamma >= 0):
            raise InvalidConfigError(f"gamma must be non-negative, got {self.gamma}")
        g = self.coupling.value(freqs.size)
        if not (math.isfinite(g) and g >= 0):
            raise InvalidConfigError(f"coupling must be finite and non-negative, got {g}")

    @property
    def n_emitters(self):
        return int(self.emitter_freqs.size)

    @property
    def g(self):
        return self.coupling.value(self.n_emitters)

    def replace(self, **changes):
        kw = dict(emitter_freqs=self.emitter_freqs, coupling=self.coupling,
                  kappa=self.kappa, gamma=self.gamma)
        kw.update(changes)
        return SystemConfig(**kw)

    def __eq__(self, other):
        if not isinstance(other, SystemConfig):
            return NotImplemented
        return (np.array_equal(self.emitter_freqs, other.emitter_freqs)
                and self.coupling == other.coupling
                and self.kappa == other.kappa and self.gamma == other.gamma)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Pulse:
    """Piecewise-constant cavity detuning on ``[0, duration)``; zero afterwards."""

    duration: float
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).ravel()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if not (math.isfinite(self.duration) and self.duration > 0):
            raise InvalidConfigError(f"pulse duration must be positive, got {self.duration}")
        if vals.size < 1:
            raise InvalidConfigError("a pulse needs at least one segment")
        if not np.all(np.isfinite(vals)):
            raise InvalidConfigError("pulse values must be finite")

    @classmethod
    def zeros(cls, n_segments=100, duration=10.0):
        return cls(duration, np.zeros(n_segments))

    @property
    def n_segments(self):
        return int(self.values.size)

    @property
    def dt(self):
        return self.duration / self.n_segments

    @property
    def edges(self):
        return np.linspace(0.0, self.duration, self.n_segments + 1)

    def value_at(self, t):
        if t < 0:
            raise ValueError("negative time")
        if t >= self.duration:
            return 0.0
        k = min(int(t / self.dt), self.n_segments - 1)
        return float(self.values[k])

    def with_values(self, values):
        return Pulse(self.duration, values)

    def __eq__(self, other):
        if not isinstance(other, Pulse):
            return NotImplemented
        return self.duration == other.duration and np.array_equal(self.values, other.values)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class SinglePhotonState:
    """Amplitudes (cavity, emitter 1..N) in the one-excitation sector."""

    amplitudes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "amplitudes", np.array(self.amplitudes, dtype=complex).ravel())

    @property
    def cavity(self):
        return complex(self.amplitudes[0])

    @property
    def emitters(self):
        return self.amplitudes[1:]

    @property
    def norm2(self):
        return float(np.vdot(self.amplitudes, self.amplitudes).real)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: list
    flux: np.ndarray

    def amplitudes(self):
        return np.array([s.amplitudes for s in self.states])


def symmetric_state(n):
    """Single excitation shared equally by all ``n`` emitters, cavity empty."""
    if n < 1:
        raise InvalidConfigError("symmetric state needs at least one emitter")
    amps = np.zeros(n + 1, dtype=complex)
    amps[1:] = 1.0 / math.sqrt(n)
    return SinglePhotonState(amps)


def effective_hamiltonian(config, pulse, t):
    """Non-Hermitian single-excitation Hamiltonian at time ``t``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    n = config.n_emitters
    g = config.g
    h = np.zeros((n + 1, n + 1), dtype=complex)
    h[0, 0] = pulse.value_at(t) - 0.5j * config.kappa
    idx = np.arange(1, n + 1)
    h[idx, idx] = config.emitter_freqs - 0.5j * config.gamma
    h[0, 1:] = g
    h[1:, 0] = g
    return h


def arrow_problem(config, coherent=False, initial=None):
    """Generator ``A = -i H_eff`` (pulse excluded) as an arrowhead problem."""
    n = config.n_emitters
    kappa = 0.0 if coherent else config.kappa
    gamma = 0.0 if coherent else config.gamma
    d = np.empty(n + 1, dtype=complex)
    d[0] = -0.5 * kappa
    d[1:] = -1j * config.emitter_freqs - 0.5 * gamma
    cpl = np.full(n + 1, -1j * config.g, dtype=complex)
    cpl[0] = 0.0
    w = np.full(n + 1, gamma)
    w[0] = 0.0
    y0 = symmetric_state(n).amplitudes if initial is None else np.asarray(initial, complex)
    return ArrowProblem(d=d, u=cpl, v=cpl.copy(), y0=y0, q0=config.kappa, weights=w)


def _breakpoints(pulse, t0, t1, extra=()):
    pts = [t for t in pulse.edges if t0 < t < t1]
    pts.extend(t for t in extra if t0 < t < t1)
    return np.unique(np.concatenate([[t0], np.asarray(pts, float), [t1]]))


def evolve(config, pulse, initial, t0, t1, tol=DEFAULT_TOL, t_eval=None,
           coherent=False):
    """Integrate ``i dc/dt = H_eff(t) c`` from ``t0`` to ``t1``.

    Steps never cross a pulse-segment edge or a requested sample time. The
    returned trajectory holds every accepted step.
    """
    if not t1 > t0 >= 0:
        raise ValueError("need t1 > t0 >= 0")
    if not tol > 0:
        raise ValueError("tol must be positive")
    prob = arrow_problem(config, coherent=coherent)
    y = (initial.amplitudes if isinstance(initial, SinglePhotonState)
         else np.asarray(initial, complex)).copy()
    if y.shape != (config.n_emitters + 1,):
        raise InvalidConfigError("initial state has the wrong dimension")
    pts = _breakpoints(pulse, t0, t1, () if t_eval is None else t_eval)
    times, states = [t0], [y]
    h = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        theta = pulse.value_at(0.5 * (a + b))
        y, _, _, h, _, ts, ys = kernels.forward(
            prob.diag(theta), prob.u, prob.v, prob.weights, y, a, b, tol, tol, h, True)
        times.extend(ts[1:])
        states.extend(ys[1:])
    amps = np.array(states)
    kappa = 0.0 if coherent else config.kappa
    return Trajectory(times=np.array(times),
                      states=[SinglePhotonState(a) for a in amps],
                      flux=kappa * np.abs(amps[:, 0]) ** 2)


def propagator(config, pulse, T=None, coherent=False, tol=DEFAULT_TOL):
    """Single-excitation propagator over ``[0, T]`` (default: pulse duration)."""
    T = pulse.duration if T is None else float(T)
    if not T > 0:
        raise ValueError("T must be positive")
    prob = arrow_problem(config, coherent=coherent)
    n = config.n_emitters + 1
    pts = _breakpoints(pulse, 0.0, T)
    u = np.eye(n, dtype=complex)
    for j in range(n):
        y = u[:, j].copy()
        h = 0.0
        for a, b in zip(pts[:-1], pts[1:]):
            theta = pulse.value_at(0.5 * (a + b))
            y, _, _, h, _, _, _ = kernels.forward(
                prob.diag(theta), prob.u, prob.v, prob.weights, y, a, b, tol, tol, h, False)
        u[:, j] = y
    return u


__all__ = [
    "Constant", "SqrtScaled", "SystemConfig", "Pulse", "SinglePhotonState",
    "Trajectory", "symmetric_state", "effective_hamiltonian", "evolve",
    "propagator", "arrow_problem", "IntegrationError", "DEFAULT_TOL",
]

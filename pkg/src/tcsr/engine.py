"""Piecewise-constant arrowhead dynamics: forward sweeps and adjoint gradients.

A problem is a linear system ``y' = (A0 - i theta(t) e0 e0^T) y`` where
``theta`` is a piecewise-constant control acting on component 0 only, with
running cost ``q0 |y_0|^2``. The forward sweep stores the state at every
chunk edge (pulse-segment edges, then fixed-length tail chunks); the adjoint
sweep re-integrates the state backward inside each chunk together with the
costate, so memory stays linear in the number of chunks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import IntegrationError, InvalidConfigError, NumericError


@dataclass(frozen=True)
class HorizonPolicy:
    """How far to integrate the emission integral.

    Integration stops at the first chunk edge where the residual drops
    below ``residual_cutoff`` or at ``max_time``, whichever comes first.
    A cutoff of 0 gives a fixed horizon at ``max_time``.
    """

    max_time: float = 200.0
    residual_cutoff: float = 1e-8
    tail_chunk: float = 0.25

    def __post_init__(self):
        if not self.max_time > 0 or not self.tail_chunk > 0 or self.residual_cutoff < 0:
            raise InvalidConfigError(f"invalid horizon policy {self}")


@dataclass
class ArrowProblem:
    """Generator pieces of ``A0``: diagonal ``d``, row ``u``, column ``v``."""

    d: np.ndarray
    u: np.ndarray
    v: np.ndarray
    y0: np.ndarray
    q0: float
    weights: np.ndarray
    # components whose squared norm counts as residual excitation
    residual_mask: np.ndarray | None = None

    def diag(self, theta):
        d = self.d.copy()
        d[0] -= 1j * theta
        return d


@dataclass
class ForwardPass:
    edges: np.ndarray
    thetas: np.ndarray
    states: list
    pop0: np.ndarray
    popw: np.ndarray
    steps: list = field(default_factory=list)
    residual: float = 0.0
    truncated: bool = False

    @property
    def horizon(self):
        return float(self.edges[-1])

    @property
    def cost(self):
        return float(np.sum(self.pop0))


def chunk_schedule(duration, n_segments, policy):
    """Pulse-segment edges followed by the tail grid up to ``max_time``."""
    T = float(duration)
    edges = np.linspace(0.0, T, n_segments + 1)
    if policy.max_time <= T:
        keep = edges[edges < policy.max_time]
        return np.append(keep, policy.max_time), n_segments
    n_tail = int(np.ceil((policy.max_time - T) / policy.tail_chunk - 1e-9))
    tail = T + policy.tail_chunk * np.arange(1, n_tail + 1)
    tail[-1] = policy.max_time
    return np.concatenate([edges, tail]), n_segments


def _residual(problem, y):
    a2 = np.abs(y) ** 2
    if problem.residual_mask is not None:
        a2 = a2[problem.residual_mask]
    return float(np.sum(a2))


def run_forward(problem, pulse, policy, rtol=1e-9, atol=None):
    """Integrate ``problem`` under ``pulse`` chunk by chunk."""
    atol = rtol if atol is None else atol
    edges, m = chunk_schedule(pulse.duration, pulse.n_segments, policy)
    values = np.asarray(pulse.values, dtype=float)
    y = np.array(problem.y0, dtype=complex)
    states = [y]
    pop0, popw, thetas = [], [], []
    h = 0.0
    residual = _residual(problem, y)
    used = [edges[0]]
    for k in range(len(edges) - 1):
        theta = values[k] if k < m else 0.0
        y, p0, pw, h, _, _, _ = kernels.forward(
            problem.diag(theta), problem.u, problem.v, problem.weights, y,
            edges[k], edges[k + 1], rtol, atol, h, False)
        states.append(y)
        pop0.append(problem.q0 * p0)
        popw.append(pw)
        thetas.append(theta)
        used.append(edges[k + 1])
        residual = _residual(problem, y)
        if k + 1 >= m and residual < policy.residual_cutoff:
            break
    if not np.all(np.isfinite(y)):
        raise NumericError("non-finite state in forward pass")
    truncated = residual > 100 * policy.residual_cutoff
    return ForwardPass(np.array(used), np.array(thetas), states,
                       np.array(pop0), np.array(popw), residual=residual,
                       truncated=truncated)


def gradient(problem, fwd, n_segments, rtol=1e-9, atol=None):
    """d(cost)/d(theta_k) for each pulse segment, by the adjoint method."""
    atol = rtol if atol is None else atol
    n_chunks = len(fwd.edges) - 1
    if len(fwd.states) != n_chunks + 1:
        raise RuntimeError("forward/backward horizon mismatch")
    grad = np.zeros(n_segments)
    lam = np.zeros_like(fwd.states[-1])
    h = 0.0
    for k in range(n_chunks - 1, -1, -1):
        y1 = fwd.states[k + 1]
        _, lam, s, h, _ = kernels.adjoint(
            problem.diag(fwd.thetas[k]), problem.u, problem.v, problem.q0,
            y1, lam, fwd.edges[k], fwd.edges[k + 1], rtol, atol, h)
        if k < n_segments:
            grad[k] = 2.0 * s.imag
    if not np.all(np.isfinite(grad)):
        raise NumericError("non-finite gradient")
    return grad


__all__ = ["HorizonPolicy", "ArrowProblem", "ForwardPass", "run_forward",
           "gradient", "chunk_schedule", "IntegrationError"]

"""Eigenstate superradiance and photon-generation fidelity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .core import DEFAULT_TOL, arrow_problem, propagator
from .engine import HorizonPolicy, run_forward
from .errors import NumericError

DEFAULT_HORIZON = HorizonPolicy(max_time=200.0, residual_cutoff=1e-8)


@dataclass
class EsResult:
    """Largest collective-lowering overlap and the state that attains it.

    ``spectrum`` has one entry per eigenvalue cluster (degenerate
    eigenvalues are merged), ``eigenvalues`` the matching representative
    eigenvalue of each cluster.
    """

    value: float
    argmax_state: np.ndarray
    spectrum: np.ndarray
    eigenvalues: np.ndarray


@dataclass
class FidelityResult:
    value: float
    times: np.ndarray
    emitted_flux: np.ndarray
    residual: float
    horizon: float
    emitter_loss: float
    truncated: bool

    @property
    def budget(self):
        """Emitted + lost + remaining probability (1 for a normalized start)."""
        return self.value + self.emitter_loss + self.residual


def _clusters(eigvals, tol):
    """Group indices of (sorted-by-key) eigenvalues closer than ``tol``."""
    groups = []
    for i in range(len(eigvals)):
        for grp in groups:
            if abs(eigvals[grp[0]] - eigvals[i]) <= tol:
                grp.append(i)
                break
        else:
            groups.append([i])
    return groups


def _max_overlap(vecs, eigvals, n, tol):
    """Maximize |<G| sum_i sigma_i |phi>|^2 over (clusters of) eigenvectors.

    ``vecs`` must be orthonormal. Within a cluster the emitter-sum vector is
    projected onto the whole degenerate subspace.
    """
    s = np.zeros(n + 1)
    s[1:] = 1.0
    amps = vecs.conj().T @ s
    groups = _clusters(eigvals, tol)
    spectrum = np.array([np.sum(np.abs(amps[g]) ** 2) for g in groups])
    best = int(np.argmax(spectrum))
    g = groups[best]
    phi = vecs[:, g] @ amps[g].conj()
    norm = np.linalg.norm(phi)
    phi = phi / norm if norm > 0 else vecs[:, g[0]]
    reps = np.array([eigvals[grp[0]] for grp in groups])
    return EsResult(float(spectrum[best]), phi, spectrum, reps)


def eigenstate_superradiance_static(config):
    """Overlap maximized over eigenstates of the decay-free, unmodulated Hamiltonian."""
    h = coherent_hamiltonian(config)
    try:
        w, v = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise NumericError(str(exc)) from exc
    scale = max(1.0, float(np.max(np.abs(w))))
    return _max_overlap(v, w, config.n_emitters, 1e-9 * scale)


def eigenstate_superradiance_modulated(config, pulse, tol=DEFAULT_TOL):
    """Overlap maximized over eigenstates of the coherent propagator over the pulse."""
    u = propagator(config, pulse, coherent=True, tol=tol)
    try:
        # complex Schur form of a normal matrix is diagonal with unitary Z
        t, z = sla.schur(u, output="complex")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericError(str(exc)) from exc
    phases = np.angle(np.diag(t))
    # cluster on the unit circle: compare e^{i phase}
    lam = np.exp(1j * phases)
    return _max_overlap(z, lam, config.n_emitters, 1e-7)


def coherent_hamiltonian(config, cavity_detuning=0.0):
    """Hermitian single-excitation Hamiltonian with both decays removed."""
    n = config.n_emitters
    h = np.zeros((n + 1, n + 1))
    h[0, 0] = cavity_detuning
    h[np.arange(1, n + 1), np.arange(1, n + 1)] = config.emitter_freqs
    h[0, 1:] = h[1:, 0] = config.g
    return h


def photon_fidelity(config, pulse, horizon_policy=DEFAULT_HORIZON, tol=DEFAULT_TOL):
    """Probability that the symmetric single excitation leaves through the cavity."""
    prob = arrow_problem(config)
    fwd = run_forward(prob, pulse, horizon_policy, rtol=tol)
    flux = config.kappa * np.array([abs(y[0]) ** 2 for y in fwd.states])
    return FidelityResult(
        value=fwd.cost,
        times=fwd.edges,
        emitted_flux=flux,
        residual=fwd.residual,
        horizon=fwd.horizon,
        emitter_loss=float(np.sum(fwd.popw)),
        truncated=fwd.truncated,
    )

__all__ = ["EsResult", "FidelityResult", "DEFAULT_HORIZON",
           "eigenstate_superradiance_static", "eigenstate_superradiance_modulated",
           "photon_fidelity", "coherent_hamiltonian", "HorizonPolicy"]

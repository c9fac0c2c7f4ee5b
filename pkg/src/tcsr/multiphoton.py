"""Multi-excitation emission: exact and permutation-invariant Lindblad solvers.

Both solvers use the same block structure. The Hamiltonian conserves the
total number of excitations, and every dissipator removes exactly one, so a
state that starts with a fixed excitation number stays block-diagonal in it.
Each block's density matrix is stored column-major and stacked into a
single vector; the Liouvillian acting on that vector is assembled once per
pulse value and applied through a truncated-Taylor exponential
(``scipy.sparse.linalg.expm_multiply``), with the emitted-photon and
emitter-loss integrals carried along as extra rows of the generator.

The permutation-invariant representation groups emitters into bins of
equal frequency. Within a bin the state lives on total-spin blocks
``j = N_b/2, N_b/2 - 1, ...``; each block stands for the operator
``|j,m><j,m'|`` tensored with the normalized identity on the multiplicity
space, so traces need no degeneracy factors. Individual emitter decay
couples ``j`` to ``j`` and ``j +- 1``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .core import DEFAULT_TOL, Constant, SqrtScaled, SystemConfig
from .engine import HorizonPolicy
from .errors import InvalidConfigError, NormalizationError, StateSpaceError
from .metrics import DEFAULT_HORIZON

MAX_EXACT_EMITTERS = 8
MAX_BINS = 4
MAX_LIOUVILLE_DIM = 6_000_000
LEAKAGE_LIMIT = 1e-6


@dataclass(frozen=True)
class FockTruncation:
    """Cavity photon-number cutoff; ``None`` means ``N + 2``."""

    n_max: int | None = None

    def resolve(self, n_emitters):
        n = n_emitters + 2 if self.n_max is None else int(self.n_max)
        if n < 1:
            raise InvalidConfigError("photon cutoff must be at least 1")
        return n


@dataclass(frozen=True)
class BinnedEnsemble:
    """Emitters grouped by frequency: ``bins = ((omega_b, count_b), ...)``."""

    bins: tuple

    def __post_init__(self):
        bins = tuple((float(w), int(c)) for w, c in self.bins)
        object.__setattr__(self, "bins", bins)
        if not bins:
            raise InvalidConfigError("need at least one bin")
        if any(c <= 0 for _, c in bins):
            raise InvalidConfigError("bin counts must be positive")
        if any(not math.isfinite(w) for w, _ in bins):
            raise InvalidConfigError("bin frequencies must be finite")
        if len(bins) > MAX_BINS:
            raise StateSpaceError(f"at most {MAX_BINS} frequency bins are supported")

    @classmethod
    def from_frequencies(cls, freqs):
        """Group equal frequencies; bins are ordered by frequency."""
        vals, counts = np.unique(np.asarray(freqs, float), return_counts=True)
        return cls(tuple(zip(vals.tolist(), counts.tolist())))

    @property
    def n_emitters(self):
        return sum(c for _, c in self.bins)

    @property
    def frequencies(self):
        return np.concatenate([np.full(c, w) for w, c in self.bins])

    def merged(self):
        """Bins with identical frequencies combined."""
        return BinnedEnsemble.from_frequencies(self.frequencies)


@dataclass
class MultiphotonResult:
    """Per-excitation emission fidelity and its bookkeeping."""

    value: float
    emitted: float
    emitter_loss: float
    residual: float
    n_excitations: int
    horizon: float
    truncated: bool
    leakage: float
    leakage_flag: bool
    times: np.ndarray = field(repr=False, default=None)
    trace: np.ndarray = field(repr=False, default=None)
    states: list = field(repr=False, default=None)

    @property
    def budget(self):
        return self.emitted + self.emitter_loss + self.residual


def dicke_degeneracy(n, j):
    """Number of spin-j irreducible copies among ``n`` spin-1/2 particles."""
    k = round(n / 2 - j)
    return math.comb(n, k) - (math.comb(n, k - 1) if k > 0 else 0)


@dataclass
class CollectiveState:
    """Block-diagonal density operator at time ``time``.

    ``blocks[b]`` is the matrix of block ``model.labels[b]``. In the
    permutation-invariant basis a block stands for ``p`` tensored with the
    normalized identity on its multiplicity space, so the trace is the sum
    of block traces and positivity of the full operator is that of ``p``.
    """

    model: "BlockModel"
    blocks: list
    time: float

    def trace(self):
        return float(sum(np.trace(r).real for r in self.blocks))

    def hermiticity_error(self):
        return max(float(np.max(np.abs(r - r.conj().T), initial=0.0)) for r in self.blocks)

    def min_eigenvalue(self):
        lo = np.inf
        for r, deg in zip(self.blocks, self.model.degeneracies):
            if r.size:
                lo = min(lo, float(np.linalg.eigvalsh(0.5 * (r + r.conj().T))[0]) / deg)
        return lo

    def photon_number(self):
        return float(sum(np.real(np.diag(r)) @ n for r, n in zip(self.blocks, self.model.nph)))


@dataclass
class BlockModel:
    """Excitation/spin blocks of a Lindblad problem.

    ``h0[b]`` is the non-Hermitian effective Hamiltonian of block ``b``
    without the cavity detuning, ``nph[b]`` and ``nexc[b]`` the photon and
    emitter-excitation numbers of its basis states, ``jumps`` a list of
    ``(dst, src, L)`` with ``rho_dst += L rho_src L^H``.
    """

    dims: list
    h0: list
    nph: list
    nexc: list
    jumps: list
    rho0: list
    kappa: float
    gamma: float
    n_max: int
    labels: list = field(default_factory=list)
    degeneracies: list = None

    def __post_init__(self):
        if self.degeneracies is None:
            self.degeneracies = [1] * len(self.dims)

    @property
    def offsets(self):
        return np.concatenate([[0], np.cumsum([d * d for d in self.dims])])

    @property
    def size(self):
        return int(self.offsets[-1])


# ---------------------------------------------------------------- assembly


def _vec_diag(values):
    d = values.size
    out = np.zeros(d * d)
    out[np.arange(d) * (d + 1)] = values
    return out


def _liouvillian(model):
    """Return (L0, detuning diagonal, observable rows)."""
    off = model.offsets
    nb = len(model.dims)
    grid = [[None] * nb for _ in range(nb)]
    det = np.zeros(model.size, dtype=complex)
    for b, d in enumerate(model.dims):
        h = sp.csr_matrix(model.h0[b])
        eye = sp.identity(d, format="csr")
        grid[b][b] = -1j * (sp.kron(eye, h) - sp.kron(h.conj(), eye))
        n = model.nph[b]
        # column-major vec: index = col * d + row
        det[off[b]:off[b + 1]] = -1j * (np.tile(n, d) - np.repeat(n, d))
    for dst, src, L in model.jumps:
        L = sp.csr_matrix(L)
        term = sp.kron(L.conj(), L)
        grid[dst][src] = term if grid[dst][src] is None else grid[dst][src] + term
    for b in range(nb):
        for c in range(nb):
            if grid[b][c] is None and b == c:
                grid[b][c] = sp.csr_matrix((model.dims[b] ** 2,) * 2)
    L0 = sp.bmat(grid, format="csr")
    rows = np.zeros((3, model.size))
    for b, d in enumerate(model.dims):
        sl = slice(off[b], off[b + 1])
        rows[0, sl] = _vec_diag(model.kappa * model.nph[b])
        rows[1, sl] = _vec_diag(model.gamma * model.nexc[b])
        rows[2, sl] = _vec_diag(np.ones(d))
    return L0, det, rows


# Observable rows are scaled down so they do not inflate the 1-norm that
# sets the Taylor step count; the integrals are rescaled afterwards.
_ROW_SCALE = 1e-3


def _augment(L, rows):
    """Generator whose last two components integrate the flux and loss rows."""
    n = L.shape[0]
    top = sp.hstack([L, sp.csr_matrix((n, 2))])
    bottom = sp.hstack([sp.csr_matrix(_ROW_SCALE * rows[:2].astype(complex)),
                        sp.csr_matrix((2, 2))])
    return sp.vstack([top, bottom]).tocsr()


def _unvec(model, y):
    off = model.offsets
    return [y[off[b]:off[b + 1]].reshape(d, d, order="F")
            for b, d in enumerate(model.dims)]


def _vec(model, blocks):
    return np.concatenate([np.asarray(r, complex).ravel(order="F") for r in blocks])


# ---------------------------------------------------------------- exact model


def build_exact_model(config, trunc=FockTruncation(), initial="inverted"):
    """Cavity Fock states times all 2^N emitter configurations, by excitation number."""
    n = config.n_emitters
    if n > MAX_EXACT_EMITTERS:
        raise StateSpaceError(f"exact solver is limited to N <= {MAX_EXACT_EMITTERS}")
    n_max = trunc.resolve(n)
    kmax = n if initial == "inverted" else 1
    g, kappa, gamma = config.g, config.kappa, config.gamma
    w = config.emitter_freqs

    bases = []
    for k in range(kmax + 1):
        states = []
        for ph in range(min(k, n_max) + 1):
            for exc in itertools.combinations(range(n), k - ph):
                bits = sum(1 << i for i in exc)
                states.append((ph, bits))
        bases.append(states)
    index = [{s: i for i, s in enumerate(b)} for b in bases]

    h0, nph, nexc, jumps = [], [], [], []
    for k, states in enumerate(bases):
        d = len(states)
        ph = np.array([s[0] for s in states], float)
        ne = np.array([bin(s[1]).count("1") for s in states], float)
        en = np.array([sum(w[i] for i in range(n) if s[1] >> i & 1) for s in states])
        h = sp.lil_matrix((d, d), dtype=complex)
        h.setdiag(en - 0.5j * (kappa * ph + gamma * ne))
        for i_src, (p, bits) in enumerate(states):
            for i in range(n):
                if bits >> i & 1 and p + 1 <= n_max:
                    tgt = index[k].get((p + 1, bits & ~(1 << i)))
                    if tgt is not None:
                        amp = g * math.sqrt(p + 1)
                        h[tgt, i_src] += amp
                        h[i_src, tgt] += amp
        h0.append(h.tocsr())
        nph.append(ph)
        nexc.append(ne)
        if k > 0:
            prev = index[k - 1]
            rows, cols, vals = [], [], []
            for i_src, (p, bits) in enumerate(states):
                if p > 0:
                    rows.append(prev[(p - 1, bits)])
                    cols.append(i_src)
                    vals.append(math.sqrt(kappa * p))
            jumps.append((k - 1, k, sp.csr_matrix((vals, (rows, cols)), shape=(len(prev), d))))
            if gamma > 0:
                for i in range(n):
                    rows, cols = [], []
                    for i_src, (p, bits) in enumerate(states):
                        if bits >> i & 1:
                            rows.append(prev[(p, bits & ~(1 << i))])
                            cols.append(i_src)
                    if rows:
                        L = sp.csr_matrix((np.full(len(rows), math.sqrt(gamma)), (rows, cols)),
                                          shape=(len(prev), d))
                        jumps.append((k - 1, k, L))

    rho0 = [np.zeros((len(b), len(b)), complex) for b in bases]
    if initial == "inverted":
        i0 = index[n][(0, (1 << n) - 1)]
        rho0[n][i0, i0] = 1.0
    elif initial == "symmetric":
        psi = np.zeros(len(bases[1]), complex)
        for i in range(n):
            psi[index[1][(0, 1 << i)]] = 1.0 / math.sqrt(n)
        rho0[1] = np.outer(psi, psi.conj())
    else:
        raise InvalidConfigError(f"unknown initial state {initial!r}")
    return BlockModel(dims=[len(b) for b in bases], h0=h0, nph=nph, nexc=nexc,
                      jumps=jumps, rho0=rho0, kappa=kappa, gamma=gamma, n_max=n_max,
                      labels=[("k", k) for k in range(len(bases))])


# ---------------------------------------------------------------- binned model


def _local_decay_channels(j, n_bin):
    """(delta_j, K, F(m)) for sum_i s_i X s_i^+ on the normalized spin-j block."""
    out = []
    if j > 0:
        out.append((0, (n_bin / 2 + 1) / (2 * j * (j + 1)),
                    lambda m: math.sqrt(max((j + m) * (j - m + 1), 0.0))))
    if j >= 1:
        out.append((-1, (n_bin / 2 + j + 1) / (2 * j * (2 * j + 1)),
                    lambda m: math.sqrt(max((j + m) * (j + m - 1), 0.0))))
    if j + 1 <= n_bin / 2:
        out.append((+1, (n_bin / 2 - j) / (2 * (j + 1) * (2 * j + 1)),
                    lambda m: math.sqrt(max((j - m + 1) * (j - m + 2), 0.0))))
    return out


def _spin_values(n_bin):
    # twice-j as integers to keep keys exact
    return list(range(n_bin, -1, -2))


def build_binned_model(binned, coupling, kappa=1.0, gamma=0.0, trunc=FockTruncation(),
                       initial="inverted"):
    """Permutation-invariant blocks for emitters grouped into frequency bins."""
    n = binned.n_emitters
    n_max = trunc.resolve(n)
    g = coupling.value(n)
    if not (math.isfinite(g) and g >= 0 and kappa > 0 and gamma >= 0):
        raise InvalidConfigError("invalid coupling or decay rates")
    freqs = [w for w, _ in binned.bins]
    counts = [c for _, c in binned.bins]
    nb = len(counts)
    kmax = n if initial == "inverted" else 1

    # spin tuples (twice j per bin); gamma = 0 keeps only the maximal one
    if gamma > 0:
        tj_sets = list(itertools.product(*[_spin_values(c) for c in counts]))
    else:
        tj_sets = [tuple(counts)]

    blocks = {}  # (tj tuple, k) -> list of (n_ph, e_1..e_B)
    for tj in tj_sets:
        base = sum((c - t) // 2 for c, t in zip(counts, tj))  # excitations at m = -j
        ranges = [range(t + 1) for t in tj]
        by_k = {}
        for es in itertools.product(*ranges):
            ex = base + sum(es)
            for ph in range(0, min(n_max, kmax - ex) + 1):
                by_k.setdefault(ex + ph, []).append((ph,) + es)
        for k, states in by_k.items():
            if k <= kmax:
                blocks[(tj, k)] = states
    keys = sorted(blocks, key=lambda key: (-key[1], key[0]))
    if sum(len(blocks[key]) ** 2 for key in keys) > MAX_LIOUVILLE_DIM:
        raise StateSpaceError("binned state space too large")
    pos = {key: i for i, key in enumerate(keys)}
    index = {key: {s: i for i, s in enumerate(blocks[key])} for key in keys}

    h0, nph, nexc, jumps = [], [], [], []
    for key in keys:
        tj, k = key
        states = blocks[key]
        d = len(states)
        idx = index[key]
        ph = np.array([s[0] for s in states], float)
        # excitation of bin b: N_b/2 + m_b with m_b = -j_b + e_b
        exc = np.array([[(c - t) / 2 + e for c, t, e in zip(counts, tj, s[1:])] for s in states])
        ne = exc.sum(axis=1)
        en = exc @ np.asarray(freqs)
        h = sp.lil_matrix((d, d), dtype=complex)
        h.setdiag(en - 0.5j * (kappa * ph + gamma * ne))
        for i_src, s in enumerate(states):
            p = s[0]
            if p + 1 > n_max:
                continue
            for b in range(nb):
                jb = tj[b] / 2
                m = -jb + s[1 + b]
                if s[1 + b] == 0:
                    continue
                tgt = list(s)
                tgt[0] += 1
                tgt[1 + b] -= 1
                i_tgt = idx.get(tuple(tgt))
                if i_tgt is None:
                    continue
                amp = g * math.sqrt(p + 1) * math.sqrt((jb + m) * (jb - m + 1))
                h[i_tgt, i_src] += amp
                h[i_src, i_tgt] += amp
        h0.append(h.tocsr())
        nph.append(ph)
        nexc.append(ne)

        # jumps out of this block into excitation k - 1
        if k == 0:
            continue
        dst_key = (tj, k - 1)
        if dst_key in pos:
            rows, cols, vals = [], [], []
            for i_src, s in enumerate(states):
                if s[0] > 0:
                    t = (s[0] - 1,) + s[1:]
                    rows.append(index[dst_key][t])
                    cols.append(i_src)
                    vals.append(math.sqrt(kappa * s[0]))
            if rows:
                jumps.append((pos[dst_key], pos[key],
                              sp.csr_matrix((vals, (rows, cols)), shape=(len(blocks[dst_key]), d))))
        if gamma > 0:
            for b in range(nb):
                jb = tj[b] / 2
                for dj, K, F in _local_decay_channels(jb, counts[b]):
                    new_tj = list(tj)
                    new_tj[b] = tj[b] + 2 * dj
                    dkey = (tuple(new_tj), k - 1)
                    if dkey not in pos:
                        continue
                    rows, cols, vals = [], [], []
                    for i_src, s in enumerate(states):
                        m = -jb + s[1 + b]
                        amp = F(m)
                        m_new = m - 1
                        j_new = jb + dj
                        if amp == 0.0 or abs(m_new) > j_new + 1e-9:
                            continue
                        t = list(s)
                        t[1 + b] = int(round(m_new + j_new))
                        i_tgt = index[dkey].get(tuple(t))
                        if i_tgt is None:
                            continue
                        rows.append(i_tgt)
                        cols.append(i_src)
                        vals.append(math.sqrt(gamma * K) * amp)
                    if rows:
                        jumps.append((pos[dkey], pos[key],
                                      sp.csr_matrix((vals, (rows, cols)),
                                                    shape=(len(blocks[dkey]), d))))

    rho0 = [np.zeros((len(blocks[k]),) * 2, complex) for k in keys]
    top = tuple(counts)
    if initial == "inverted":
        key = (top, n)
        s0 = (0,) + tuple(counts)
        i0 = index[key][s0]
        rho0[pos[key]][i0, i0] = 1.0
    elif initial == "symmetric":
        key = (top, 1)
        psi = np.zeros(len(blocks[key]), complex)
        for b in range(nb):
            s = [0] * (nb + 1)
            s[1 + b] = 1
            psi[index[key][tuple(s)]] = math.sqrt(counts[b] / n)
        rho0[pos[key]] = np.outer(psi, psi.conj())
    else:
        raise InvalidConfigError(f"unknown initial state {initial!r}")
    return BlockModel(dims=[len(blocks[k]) for k in keys], h0=h0, nph=nph, nexc=nexc,
                      jumps=jumps, rho0=rho0, kappa=kappa, gamma=gamma, n_max=n_max,
                      labels=keys,
                      degeneracies=[math.prod(dicke_degeneracy(c, t / 2) for c, t in zip(counts, key[0]))
                                    for key in keys])


# ---------------------------------------------------------------- evolution


def run_model(model, pulse, horizon_policy=DEFAULT_HORIZON, tail_chunk=1.0,
              keep_states=False):
    """Evolve a block model under ``pulse`` and integrate the emission."""
    L0, det, rows = _liouvillian(model)
    size = model.size
    y = _vec(model, model.rho0)
    exc_row = np.zeros(size)
    top_row = np.zeros(size)
    off = model.offsets
    for b, d in enumerate(model.dims):
        exc_row[off[b]:off[b + 1]] = _vec_diag(model.nph[b] + model.nexc[b])
        top_row[off[b]:off[b + 1]] = _vec_diag((model.nph[b] == model.n_max).astype(float))
    n_exc0 = float(np.real(exc_row @ y))
    watch_leak = model.n_max < round(n_exc0)

    T = pulse.duration
    edges = list(pulse.edges)
    if horizon_policy.max_time > T:
        n_tail = int(np.ceil((horizon_policy.max_time - T) / tail_chunk - 1e-9))
        tail = T + tail_chunk * np.arange(1, n_tail + 1)
        tail[-1] = horizon_policy.max_time
        edges.extend(tail.tolist())
    else:
        edges = [t for t in edges if t < horizon_policy.max_time] + [horizon_policy.max_time]
    values = np.asarray(pulse.values)

    emitted = lost = 0.0
    leak = 0.0
    times, traces = [0.0], [float(np.real(rows[2] @ y))]
    states = [CollectiveState(model, _unvec(model, y), 0.0)] if keep_states else None
    cache = {}
    residual = n_exc0
    for k in range(len(edges) - 1):
        theta = float(values[k]) if k < pulse.n_segments else 0.0
        gen = cache.get(theta)
        if gen is None:
            L = L0 + sp.diags(theta * det) if theta != 0.0 else L0
            gen = _augment(L.tocsr(), rows)
            gen = (gen, gen.diagonal().sum())
            if len(cache) > 4:
                cache.clear()
            cache[theta] = gen
        h = edges[k + 1] - edges[k]
        z = expm_multiply(gen[0] * h, np.concatenate([y, [0.0, 0.0]]), traceA=gen[1] * h)
        y = z[:size]
        emitted += float(z[size].real) / _ROW_SCALE
        lost += float(z[size + 1].real) / _ROW_SCALE
        times.append(edges[k + 1])
        traces.append(float(np.real(rows[2] @ y)))
        if keep_states:
            states.append(CollectiveState(model, _unvec(model, y), edges[k + 1]))
        if watch_leak:
            leak = max(leak, float(np.real(top_row @ y)))
        residual = float(np.real(exc_row @ y))
        if k + 1 >= pulse.n_segments and residual < horizon_policy.residual_cutoff * max(n_exc0, 1):
            break
    truncated = residual > 100 * horizon_policy.residual_cutoff * max(n_exc0, 1)
    n0 = max(round(n_exc0), 1)
    return MultiphotonResult(
        value=emitted / n0, emitted=emitted, emitter_loss=lost, residual=residual,
        n_excitations=int(round(n_exc0)), horizon=times[-1], truncated=truncated,
        leakage=leak, leakage_flag=leak > LEAKAGE_LIMIT, times=np.array(times),
        trace=np.array(traces), states=states)


def exact_full_fidelity(config, pulse, trunc=FockTruncation(), horizon_policy=DEFAULT_HORIZON,
                        initial="inverted", keep_states=False):
    """Per-excitation emission fidelity of the fully inverted ensemble (N <= 8)."""
    model = build_exact_model(config, trunc, initial)
    return run_model(model, pulse, horizon_policy, keep_states=keep_states)


def binned_fidelity(binned, coupling, kappa, gamma, pulse, trunc=FockTruncation(),
                    horizon_policy=DEFAULT_HORIZON, initial="inverted", keep_states=False):
    """Same observable as :func:`exact_full_fidelity` in the permutation-invariant basis."""
    model = build_binned_model(binned, coupling, kappa, gamma, trunc, initial)
    return run_model(model, pulse, horizon_policy, keep_states=keep_states)


def homogeneous_fidelity(n, coupling, kappa, gamma, pulse=None, center=0.0,
                         trunc=FockTruncation(), horizon_policy=DEFAULT_HORIZON):
    """Per-excitation fidelity of ``n`` identical emitters at ``center``."""
    from .core import Pulse

    pulse = Pulse.zeros() if pulse is None else pulse
    ens = BinnedEnsemble(((center, n),))
    return binned_fidelity(ens, coupling, kappa, gamma, pulse, trunc, horizon_policy).value


def normalized_fidelity(raw, config, center=0.0, pulse=None, trunc=FockTruncation(),
                        horizon_policy=DEFAULT_HORIZON):
    """Divide a per-excitation fidelity by that of a homogeneous ensemble.

    The reference puts all emitters at ``center`` (the mean of the disorder
    distribution) with the same N, coupling, decay rates and horizon; it is
    unmodulated unless ``pulse`` is given.
    """
    base = homogeneous_fidelity(config.n_emitters, config.coupling, config.kappa,
                                config.gamma, pulse, center, trunc, horizon_policy)
    if base < 1e-12:
        raise NormalizationError("homogeneous reference fidelity is below 1e-12")
    return raw / base


def one_excitation_hamiltonian(config, theta=0.0):
    """Block k = 1 of the exact model, reordered as (cavity, emitter 1..N)."""
    model = build_exact_model(config, FockTruncation(max(config.n_emitters, 1)), "symmetric")
    h = model.h0[1].toarray()
    h[np.diag_indices_from(h)] += theta * model.nph[1]
    n = config.n_emitters
    # basis order in the block: emitters 0..N-1 (no photon), then the photon
    perm = [n] + list(range(n))
    return h[np.ix_(perm, perm)]


__all__ = ["FockTruncation", "BinnedEnsemble", "MultiphotonResult", "BlockModel",
           "CollectiveState", "one_excitation_hamiltonian", "dicke_degeneracy",
           "build_exact_model", "build_binned_model", "run_model",
           "exact_full_fidelity", "binned_fidelity", "homogeneous_fidelity",
           "normalized_fidelity", "MAX_EXACT_EMITTERS"]

"""Single-particle eigenbasis kernels.

Everything here exploits that the Hamiltonian is a free-fermion quadratic
form: pure Fock states are Slater determinants, traces against
exp(-i(Ht - theta*N)) factorize over eigenmodes, and matrix elements between
non-orthogonal Slater determinants follow the transition-density Wick
theorem.  These are the O(N^2)-per-term engines behind the filter sums; the
Majorana/Pfaffian module provides the same quantities through covariance
matrices, and the two paths are cross-checked in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gaussian import FockState, QuadraticHamiltonian

# Pair terms whose Loschmidt overlap is below this are dropped from
# double-filter sums: their true contribution is bounded by the overlap
# itself, while keeping them would push roundoff through ill-conditioned
# transition inverses (error ~ eps_machine / |overlap|).
OVERLAP_SKIP = 1e-8

# Single-mode trace factors |1 + e^{-i phi}| below this trigger the exact
# leave-out evaluation of that filter/projector term.
TINY_FACTOR = 1e-12


def fock_energy(state: FockState, ham: QuadraticHamiltonian) -> float:
    """<psi|H|psi> of a Fock state: diagonal of h over occupied sites."""
    occ = list(state.occupied_sites)
    return float(ham.offset + ham.h[occ, occ].sum().real)


def loschmidt_series(
    ham: QuadraticHamiltonian, state: FockState, times: np.ndarray
) -> np.ndarray:
    """f_psi(t) = <psi|e^{-iHt}|psi> as det of the occupied propagator block."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    vals, vecs = ham.eigensystem
    rows = vecs[list(state.occupied_sites), :]
    if rows.shape[0] == 0:
        return np.exp(-1j * ham.offset * times)
    phases = np.exp(-1j * np.outer(times, vals))
    blocks = np.einsum("aj,tj,bj->tab", rows, phases, rows.conj(), optimize=True)
    return np.exp(-1j * ham.offset * times) * np.linalg.det(blocks)


@dataclass
class SeriesNumerators:
    """Unnormalized filtered two-time functions.

    ab(t) ~ numerator of <A(t) B(0)>, ba(t) ~ numerator of <B(0) A(t)>;
    `norm` is the filter normalization; `lin_a(t)` / `lin_b` are one-body
    numerators for mean subtraction; `static` holds numerators of extra
    one-body observables.
    """

    norm: complex
    ab: np.ndarray
    ba: np.ndarray
    lin_a: np.ndarray
    lin_b: complex
    static: dict = field(default_factory=dict)


def _frequency_contract(mat: np.ndarray, vals: np.ndarray, times: np.ndarray):
    """sum_jl e^{i(eps_j - eps_l)t} mat_jl for each t."""
    ph = np.exp(1j * np.outer(times, vals))
    return ((ph @ mat) * ph.conj()).sum(axis=1)


# ---------------------------------------------------------------------------
# exact filter-ensemble kernel (fixed filling via the number projector)
# ---------------------------------------------------------------------------


def _leave_out_products(g: np.ndarray):
    """(prod g, prod excluding j, prod excluding j and l) robust to zeros."""
    n = g.shape[0]
    zero = np.abs(g) < 1e-280
    nz = int(zero.sum())
    p1 = np.zeros(n, dtype=complex)
    p2 = np.zeros((n, n), dtype=complex)
    if nz == 0:
        total = complex(g.prod())
        p1[:] = total / g
        p2[:] = np.outer(p1, 1.0 / g)
    elif nz == 1:
        total = 0.0
        j0 = int(np.nonzero(zero)[0][0])
        gg = g.copy()
        gg[j0] = 1.0
        rest = complex(gg.prod())
        p1[j0] = rest
        p2[j0, :] = rest / gg
        p2[:, j0] = rest / gg
    elif nz == 2:
        total = 0.0
        j0, j1 = (int(i) for i in np.nonzero(zero)[0][:2])
        gg = g.copy()
        gg[[j0, j1]] = 1.0
        rest = complex(gg.prod())
        p2[j0, j1] = p2[j1, j0] = rest
    else:
        total = 0.0
    np.fill_diagonal(p2, 0.0)
    return total, p1, p2


def _exact_term(c: complex, phi: np.ndarray, adiag, bdiag):
    """Exact (z, s1, lin_a, lin_b, w1) contribution of one pathological term.

    The j == l diagonal is folded into w1 as the combined c*T*f_j, which
    stays finite where the separated Wick pieces diverge.
    """
    g = 1.0 + np.exp(-1j * phi)
    total, p1, p2 = _leave_out_products(g)
    emi = np.exp(-1j * phi)
    z = c * total
    s1 = c * np.einsum("j,l,j,l,jl->", adiag, bdiag, emi, emi, p2, optimize=True)
    lin_a = c * (adiag * emi) @ p1
    lin_b = c * (bdiag * emi) @ p1
    w1 = c * emi[:, None] * p2
    w1[np.diag_indices_from(w1)] = c * emi * p1
    return z, s1, lin_a, lin_b, w1


def ensemble_series(
    ham: QuadraticHamiltonian,
    weights: np.ndarray,
    times_k: np.ndarray,
    n_particles: int | None,
    a_mat: np.ndarray,
    b_mat: np.ndarray | None,
    times: np.ndarray,
    static_ops: dict | None = None,
    chunk: int = 16,
) -> SeriesNumerators:
    """Numerators Tr[X P_delta(E) proj] for X in {A(t)B, B A(t), A(t), B, 1}.

    `weights`/`times_k` are the Riemann filter weights (energy phase folded
    in); `n_particles` selects the fixed-filling projector (None = full
    space); `a_mat`, `b_mat` are one-body fermion matrices (`b_mat=None`
    reuses A).  Traces factorize over eigenmodes with generalized
    occupations f_j = e^{-i phi_j} / (1 + e^{-i phi_j}).
    """
    vals, vecs = ham.eigensystem
    n = ham.n_sites
    at = vecs.conj().T @ np.asarray(a_mat) @ vecs
    bt = at if b_mat is None else vecs.conj().T @ np.asarray(b_mat) @ vecs
    adiag = np.ascontiguousarray(np.diag(at))
    bdiag = np.ascontiguousarray(np.diag(bt))
    stat_diag = {
        name: np.ascontiguousarray(np.diag(vecs.conj().T @ np.asarray(m) @ vecs))
        for name, m in (static_ops or {}).items()
    }

    if n_particles is None:
        angles = np.zeros(1)
        prefs = np.ones(1, dtype=complex)
    else:
        kk = np.arange(n + 1)
        angles = 2.0 * np.pi * kk / (n + 1)
        prefs = np.exp(-1j * angles * n_particles) / (n + 1)

    z_acc = 0.0 + 0.0j
    s1_acc = 0.0 + 0.0j
    lin_a_acc = 0.0 + 0.0j
    lin_b_acc = 0.0 + 0.0j
    stat_acc = {name: 0.0 + 0.0j for name in stat_diag}
    w1 = np.zeros((n, n), dtype=complex)

    times_k = np.asarray(times_k, dtype=float)
    weights = np.asarray(weights)
    for start in range(0, len(times_k), chunk):
        tk = times_k[start:start + chunk]
        uk = weights[start:start + chunk]
        phi = vals[None, None, :] * tk[:, None, None] - angles[None, :, None]
        g = 1.0 + np.exp(-1j * phi)
        bad = np.abs(g) < TINY_FACTOR
        g_safe = np.where(bad, 1.0, g)
        prod = g_safe.prod(axis=2) * np.exp(-1j * ham.offset * tk)[:, None]
        c = uk[:, None] * prefs[None, :]
        ct = c * prod
        f = np.exp(-1j * phi) / g_safe
        z_acc += ct.sum()
        asum = f @ adiag
        bsum = f @ bdiag
        s1_acc += (ct * asum * bsum).sum()
        lin_a_acc += (ct * asum).sum()
        lin_b_acc += (ct * bsum).sum()
        for name, d in stat_diag.items():
            stat_acc[name] += (ct * (f @ d)).sum()
        alpha = (ct[..., None] * f).reshape(-1, n)
        beta = (1.0 / g_safe).reshape(-1, n)
        w1 += alpha.T @ beta
        if bad.any():
            # replace the clamped version of pathological terms by the exact one
            for kk_i, kap_i in np.argwhere(bad.any(axis=2)):
                phi_t = vals * tk[kk_i] - angles[kap_i]
                cc = c[kk_i, kap_i] * np.exp(-1j * ham.offset * tk[kk_i])
                gg = np.where(
                    np.abs(1.0 + np.exp(-1j * phi_t)) < TINY_FACTOR,
                    1.0,
                    1.0 + np.exp(-1j * phi_t),
                )
                pr = gg.prod()
                ff = np.exp(-1j * phi_t) / gg
                z_acc -= cc * pr
                s1_acc -= cc * pr * (ff @ adiag) * (ff @ bdiag)
                lin_a_acc -= cc * pr * (ff @ adiag)
                lin_b_acc -= cc * pr * (ff @ bdiag)
                for name, d in stat_diag.items():
                    stat_acc[name] -= cc * pr * (ff @ d)
                w1 -= np.outer(cc * pr * ff, 1.0 / gg)
                z_e, s1_e, la_e, lb_e, w1_e = _exact_term(cc, phi_t, adiag, bdiag)
                z_acc += z_e
                s1_acc += s1_e
                lin_a_acc += la_e
                lin_b_acc += lb_e
                w1 += w1_e
                for name, d in stat_diag.items():
                    stat_acc[name] += _exact_term(cc, phi_t, d, d)[2]

    pair_mat = at * bt.T  # P_jl = At_jl * Bt_lj
    times = np.asarray(times, dtype=float)
    ab = s1_acc + _frequency_contract(pair_mat * w1, vals, times)
    ba = s1_acc + _frequency_contract(pair_mat * w1.T, vals, times)
    # ensemble is stationary: <A(t)> numerator is t-independent
    lin_a = np.full(len(times), lin_a_acc, dtype=complex)
    return SeriesNumerators(
        norm=z_acc, ab=ab, ba=ba, lin_a=lin_a, lin_b=lin_b_acc, static=stat_acc
    )


def projector_trace_series(
    ham: QuadraticHamiltonian,
    times_k: np.ndarray,
    n_particles: int | None,
    chunk: int = 64,
) -> np.ndarray:
    """Tr[e^{-iHt} proj] for each t in times_k (proj = fixed filling or 1)."""
    vals, _ = ham.eigensystem
    n = ham.n_sites
    if n_particles is None:
        angles = np.zeros(1)
        prefs = np.ones(1, dtype=complex)
    else:
        kk = np.arange(n + 1)
        angles = 2.0 * np.pi * kk / (n + 1)
        prefs = np.exp(-1j * angles * n_particles) / (n + 1)
    times_k = np.asarray(times_k, dtype=float)
    out = np.empty(len(times_k), dtype=complex)
    for start in range(0, len(times_k), chunk):
        tk = times_k[start:start + chunk]
        phi = vals[None, None, :] * tk[:, None, None] - angles[None, :, None]
        prod = (1.0 + np.exp(-1j * phi)).prod(axis=2)
        out[start:start + len(tk)] = (
            np.exp(-1j * ham.offset * tk) * (prod @ prefs)
        )
    return out


# ---------------------------------------------------------------------------
# pure-state kernels (transition-density Wick between evolved Slater states)
# ---------------------------------------------------------------------------


class _SlaterBank:
    """Phase-shifted occupied-row banks of a Fock state on a uniform grid.

    rows_k[k] = U_S diag(e^{-i eps dt})^k for k in [-K..K], where U_S are the
    occupied rows of the eigenvector matrix.
    """

    def __init__(self, ham: QuadraticHamiltonian, state: FockState, dt: float, kmax: int):
        vals, vecs = ham.eigensystem
        self.vals = vals
        self.dt = dt
        self.kmax = kmax
        self.rows = vecs[list(state.occupied_sites), :]  # N0 x N
        ks = np.arange(-kmax, kmax + 1)
        self.phases = np.exp(-1j * np.outer(ks, vals) * dt)  # (2K+1, N)
        self.banks = self.rows[None, :, :] * self.phases[:, None, :]

    def rows_k(self, k: int) -> np.ndarray:
        return self.banks[k + self.kmax]


def _overlap_bank(bank: _SlaterBank, offset: float):
    """S_m = occupied block of e^{-iH m dt}, its dets and (masked) inverses."""
    kmax2 = 2 * bank.kmax
    ms = np.arange(-kmax2, kmax2 + 1)
    ph = np.exp(-1j * np.outer(ms, bank.vals) * bank.dt)
    s = np.einsum(
        "aj,mj,bj->mab", bank.rows, ph, bank.rows.conj(), optimize=True
    )
    dets = np.linalg.det(s) * np.exp(-1j * offset * ms * bank.dt)
    keep = np.abs(dets) >= OVERLAP_SKIP
    inv = np.zeros_like(s)
    if keep.any():
        inv[keep] = np.linalg.inv(s[keep])
    return ms, dets, inv, keep


def pure_pair_series(
    ham: QuadraticHamiltonian,
    state: FockState,
    weights: np.ndarray,
    n_filter: int,
    dt: float,
    a_mat: np.ndarray,
    b_mat: np.ndarray | None,
    times: np.ndarray,
) -> SeriesNumerators:
    """Double-filter numerators <psi|e^{-iHt_k} X e^{-iHt_k'}|psi>, summed
    over (k, k') with the filter weights, for X in {A(t)B, B A(t), A(t), B, 1}.

    The Heisenberg time t of A enters only through the final frequency
    contraction, so one (k, k') sweep serves the whole time grid.
    """
    vals, vecs = ham.eigensystem
    n = ham.n_sites
    at = vecs.conj().T @ np.asarray(a_mat) @ vecs
    bt = at if b_mat is None else vecs.conj().T @ np.asarray(b_mat) @ vecs

    kmax = n_filter
    bank = _SlaterBank(ham, state, dt, kmax)
    ms, dets, inv, keep = _overlap_bank(bank, ham.offset)
    m0 = 2 * kmax  # index of m = 0 in the overlap bank

    # B~ @ (rows_{-k'})^dagger, indexed by k' (note the bank reversal)
    bl = np.einsum("pq,kaq->kpa", bt, bank.banks[::-1].conj(), optimize=True)

    z_acc = 0.0 + 0.0j
    s_b_acc = 0.0 + 0.0j
    fm = np.zeros((n, n), dtype=complex)
    fm_rev = np.zeros((n, n), dtype=complex)
    fm_lin = np.zeros((n, n), dtype=complex)

    w = np.asarray(weights)
    for ki, k in enumerate(range(-kmax, kmax + 1)):
        rk = bank.rows_k(k)  # N0 x N
        for kpi, kp in enumerate(range(-kmax, kmax + 1)):
            mi = m0 + k + kp
            if not keep[mi]:
                continue
            w_pair = w[ki] * w[kpi] * dets[mi]
            lc = bank.banks[kmax - kp].conj().T  # N x N0 = (rows_{-k'})^dag
            gmat = inv[mi] @ rk  # N0 x N
            rho = lc @ gmat
            brho = bl[kpi] @ gmat
            gb = gmat @ bt
            rho_b = lc @ gb
            small = gb @ lc
            rho_b_rho = lc @ (small @ gmat)
            s_b = np.einsum("pa,ap->", bl[kpi], gmat, optimize=True)
            z_acc += w_pair
            s_b_acc += w_pair * s_b
            fm += w_pair * (s_b * rho + brho - rho_b_rho)
            fm_rev += w_pair * (s_b * rho + rho_b - rho_b_rho)
            fm_lin += w_pair * rho

    times = np.asarray(times, dtype=float)
    ab = _frequency_contract(at * fm.T, vals, times)
    ba = _frequency_contract(at * fm_rev.T, vals, times)
    lin_a = _frequency_contract(at * fm_lin.T, vals, times)
    return SeriesNumerators(norm=z_acc, ab=ab, ba=ba, lin_a=lin_a, lin_b=s_b_acc)


def pure_single_filter_series(
    ham: QuadraticHamiltonian,
    state: FockState,
    weights: np.ndarray,
    n_filter: int,
    dt: float,
    a_mat: np.ndarray,
    b_mat: np.ndarray | None,
    times: np.ndarray,
) -> SeriesNumerators:
    """Single-filter numerators <psi| X e^{-iHt_k}|psi> summed with weights.

    Same outputs as `pure_pair_series` for the one-sided quantity
    <X P_delta(E)>_psi used by the sampled-ensemble estimator.
    """
    vals, vecs = ham.eigensystem
    n = ham.n_sites
    at = vecs.conj().T @ np.asarray(a_mat) @ vecs
    bt = at if b_mat is None else vecs.conj().T @ np.asarray(b_mat) @ vecs

    kmax = n_filter
    bank = _SlaterBank(ham, state, dt, kmax)
    rows0 = bank.rows  # bra side at k = 0
    # overlap with ket e^{-iH t_k}|psi>: occupied block of e^{-iH t_k}
    s = np.einsum(
        "aj,kj,bj->kab", rows0, bank.phases, rows0.conj(), optimize=True
    )
    ks = np.arange(-kmax, kmax + 1)
    dets = np.linalg.det(s) * np.exp(-1j * ham.offset * ks * dt)
    keep = np.abs(dets) >= OVERLAP_SKIP
    w = np.asarray(weights) * dets * keep

    inv = np.zeros_like(s)
    if keep.any():
        inv[keep] = np.linalg.inv(s[keep])

    # rho_k = lc_k @ g_k with lc_k = (rows_{-k})^dag, g_k = inv_k @ rows0
    g = np.einsum("kab,bn->kan", inv, rows0, optimize=True)
    lc = np.transpose(bank.banks[::-1].conj(), (0, 2, 1))  # (2K+1, N, N0)

    wg = w[:, None, None] * g
    fm_lin = np.einsum("kna,kam->nm", lc, wg, optimize=True)
    s_b = np.einsum("pq,kqa,kap->k", bt, lc, g, optimize=True)
    fm = np.einsum("k,kna,kam->nm", w * s_b, lc, g, optimize=True)
    fm_rev = fm.copy()
    # tr(A(t) B rho): B rho = (B lc) g
    blc = np.einsum("pq,kqa->kpa", bt, lc, optimize=True)
    fm += np.einsum("k,kna,kam->nm", w, blc, g, optimize=True)
    # tr(B A(t) rho): rho B = lc (g B)
    gb = np.einsum("kan,nm->kam", g, bt, optimize=True)
    fm_rev += np.einsum("kna,k,kam->nm", lc, w, gb, optimize=True)
    # tr(A(t) rho B rho) = tr(B rho A(t) rho): both orders share it
    small = np.einsum("kam,kmb->kab", gb, lc, optimize=True)
    sg = np.einsum("kab,kbn->kan", small, g, optimize=True)
    quad = np.einsum("k,kna,kam->nm", w, lc, sg, optimize=True)
    fm -= quad
    fm_rev -= quad

    times = np.asarray(times, dtype=float)
    ab = _frequency_contract(at * fm.T, vals, times)
    ba = _frequency_contract(at * fm_rev.T, vals, times)
    lin_a = _frequency_contract(at * fm_lin.T, vals, times)
    return SeriesNumerators(
        norm=complex(w.sum()),
        ab=ab,
        ba=ba,
        lin_a=lin_a,
        lin_b=complex((w * s_b).sum()),
    )


# ---------------------------------------------------------------------------
# incremental Metropolis weight evaluation
# ---------------------------------------------------------------------------


class WeightWalker:
    """Maintains f_psi(t_k) for all filter times under single-fermion moves.

    A move replaces one occupied row of U_S; each overlap block changes by a
    rank-2 update, so determinants follow from the matrix determinant lemma
    and inverses from Woodbury.  State is refreshed from scratch every
    `refresh_every` accepted moves to stop error accumulation.
    """

    def __init__(
        self,
        ham: QuadraticHamiltonian,
        weights: np.ndarray,
        times_k: np.ndarray,
        state: FockState,
        refresh_every: int = 64,
    ):
        vals, vecs = ham.eigensystem
        self._vals = vals
        self._vecs = vecs
        self._offset = ham.offset
        self._w = np.asarray(weights)
        self._tk = np.asarray(times_k, dtype=float)
        self._phase = np.exp(-1j * np.outer(self._tk, vals))  # (nk, N)
        self._off_phase = np.exp(-1j * ham.offset * self._tk)
        self._occ = list(state.occupied_sites)
        self._refresh_every = refresh_every
        self._since_refresh = 0
        self._rebuild()

    def _rebuild(self):
        rows = self._vecs[self._occ, :]
        self._rows = rows
        s = np.einsum(
            "aj,kj,bj->kab", rows, self._phase, rows.conj(), optimize=True
        )
        self._dets = np.linalg.det(s)
        ok = np.abs(self._dets) > 1e-300
        self._inv = np.zeros_like(s)
        self._inv[ok] = np.linalg.inv(s[ok])
        self._ok = ok
        self._since_refresh = 0

    @property
    def state(self) -> FockState:
        n = self._vecs.shape[0]
        return FockState.from_occupied(n, self._occ)

    @property
    def occupied_list(self) -> list[int]:
        """Occupied sites in internal row order (proposals index this)."""
        return list(self._occ)

    def weight(self) -> float:
        vals = self._off_phase * self._dets
        w = float(np.real(np.sum(self._w * vals)))
        return max(w, 0.0)

    def _move_update(self, row_idx: int, new_site: int):
        """Rank-2 pieces for replacing occupied row `row_idx` by `new_site`."""
        du = self._vecs[new_site, :] - self._rows[row_idx, :]
        # a_b = sum_j du_j phase_j conj(U_S[b, j]);  b_a = sum_j U_S[a,j] phase_j conj(du_j)
        a_vec = np.einsum(
            "kj,j,bj->kb", self._phase, du, self._rows.conj(), optimize=True
        )
        b_vec = np.einsum(
            "aj,kj,j->ka", self._rows, self._phase, du.conj(), optimize=True
        )
        gamma = np.einsum("kj,j,j->k", self._phase, du, du.conj(), optimize=True)
        return du, a_vec, b_vec, gamma

    def proposal_dets(self, row_idx: int, new_site: int):
        """Determinants after the move, without committing it."""
        du, a_vec, b_vec, gamma = self._move_update(row_idx, new_site)
        n0 = len(self._occ)
        er = np.zeros(n0)
        er[row_idx] = 1.0
        inv = self._inv
        # M' = M + e_r a^T + (b + gamma e_r) e_r^T
        inv_er = inv[:, :, row_idx]  # M^{-1} e_r
        a_inv = np.einsum("kb,kbc->kc", a_vec, inv, optimize=True)  # a^T M^{-1}
        c2 = b_vec + gamma[:, None] * er[None, :]
        inv_c2 = np.einsum("kbc,kc->kb", inv, c2, optimize=True)  # M^{-1} c2
        # det(I2 + D^T M^{-1} C), C = [e_r, c2], D = [a, e_r]
        m11 = 1.0 + np.einsum("kb,kb->k", a_vec, inv_er, optimize=True)
        m12 = np.einsum("kb,kb->k", a_vec, inv_c2, optimize=True)
        m21 = inv_er[:, row_idx]
        m22 = 1.0 + inv_c2[:, row_idx]
        ratio = m11 * m22 - m12 * m21
        new_dets = self._dets * ratio
        new_dets[~self._ok] = np.nan
        if np.isnan(new_dets).any():
            return None  # caller must rebuild
        return new_dets, (du, a_vec, b_vec, gamma, inv_er, a_inv, inv_c2, ratio)

    def proposal_weight(self, row_idx: int, new_site: int):
        res = self.proposal_dets(row_idx, new_site)
        if res is None:
            # singular block: recompute directly for the proposed occupation
            occ = list(self._occ)
            occ[row_idx] = new_site
            rows = self._vecs[occ, :]
            s = np.einsum(
                "aj,kj,bj->kab", rows, self._phase, rows.conj(), optimize=True
            )
            dets = np.linalg.det(s)
            w = float(np.real(np.sum(self._w * self._off_phase * dets)))
            return max(w, 0.0), None
        new_dets, cache = res
        w = float(np.real(np.sum(self._w * self._off_phase * new_dets)))
        return max(w, 0.0), (new_dets, cache)

    def accept(self, row_idx: int, new_site: int, cached=None):
        self._occ[row_idx] = new_site
        self._since_refresh += 1
        needs_exact = (
            cached is None
            or self._since_refresh >= self._refresh_every
            or not self._ok.all()
        )
        if needs_exact:
            self._rebuild()
            return
        new_dets, (du, a_vec, b_vec, gamma, inv_er, a_inv, inv_c2, ratio) = cached
        # Woodbury: M'^{-1} = M^{-1} - M^{-1} C (I2 + D^T M^{-1} C)^{-1} D^T M^{-1}
        n0 = len(self._occ)
        er = np.zeros(n0)
        er[row_idx] = 1.0
        inv = self._inv
        m11 = 1.0 + np.einsum("kb,kb->k", a_vec, inv_er, optimize=True)
        m12 = np.einsum("kb,kb->k", a_vec, inv_c2, optimize=True)
        m21 = inv_er[:, row_idx]
        m22 = 1.0 + inv_c2[:, row_idx]
        det2 = m11 * m22 - m12 * m21
        tiny = np.abs(det2) < 1e-12
        if tiny.any():
            self._rows = self._vecs[self._occ, :]
            self._rebuild()
            return
        # D^T M^{-1}: rows (a^T M^{-1}) and (e_r^T M^{-1})
        er_inv = inv[:, row_idx, :]
        i11 = m22 / det2
        i12 = -m12 / det2
        i21 = -m21 / det2
        i22 = m11 / det2
        left1 = inv_er  # M^{-1} e_r
        left2 = inv_c2  # M^{-1} c2
        row1 = a_inv  # a^T M^{-1}
        row2 = er_inv  # e_r^T M^{-1}
        upd = (
            np.einsum("kb,k,kc->kbc", left1, i11, row1, optimize=True)
            + np.einsum("kb,k,kc->kbc", left1, i12, row2, optimize=True)
            + np.einsum("kb,k,kc->kbc", left2, i21, row1, optimize=True)
            + np.einsum("kb,k,kc->kbc", left2, i22, row2, optimize=True)
        )
        self._inv = inv - upd
        self._dets = new_dets
        self._rows = self._vecs[self._occ, :]

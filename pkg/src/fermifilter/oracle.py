"""Dense many-body reference implementations for small systems: exact
filters, exact dynamics, Lehmann sums, the Kubo linear-response check, and
the product-identity check behind the post-selected correlator measurement."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.special import wofz

from .gaussian import FockState, MajoranaMonomialSum, QuadraticHamiltonian
from .filters import FilterSpec
from .model import ModelSpec, build_hamiltonian
from .response import SeriesRecord

SECTOR_DIMENSION_CAP = 2000


# ---------------------------------------------------------------------------
# dense operators on the full 2^N Fock space (test scale)
# ---------------------------------------------------------------------------


def dense_annihilation_ops(n_sites: int) -> list[np.ndarray]:
    """a_p as dense 2^N matrices; |m> = prod_{p asc} (a_p^dag)^{m_p} |0>."""
    dim = 2 ** n_sites
    ops = []
    for p in range(n_sites):
        mat = np.zeros((dim, dim))
        for st in range(dim):
            if (st >> p) & 1:
                sign = (-1) ** bin(st & ((1 << p) - 1)).count("1")
                mat[st ^ (1 << p), st] = sign
        ops.append(mat)
    return ops


def dense_majoranas(n_sites: int) -> list[np.ndarray]:
    """xi_{2p} = a_p + a_p^dag, xi_{2p+1} = -i(a_p - a_p^dag), interleaved."""
    out = []
    for a in dense_annihilation_ops(n_sites):
        ad = a.conj().T
        out.append(a + ad)
        out.append(-1j * (a - ad))
    return out


def many_body_hamiltonian(ham: QuadraticHamiltonian) -> np.ndarray:
    """Full 2^N dense matrix of sum h_pq a_p^dag a_q + offset."""
    n = ham.n_sites
    ops = dense_annihilation_ops(n)
    dim = 2 ** n
    out = np.eye(dim, dtype=complex) * ham.offset
    for p in range(n):
        for q in range(n):
            if ham.h[p, q] != 0:
                out += ham.h[p, q] * ops[p].conj().T @ ops[q]
    return out


def many_body_operator(op: MajoranaMonomialSum, n_sites: int) -> np.ndarray:
    """Dense 2^N matrix of a Majorana monomial sum."""
    xi = dense_majoranas(n_sites)
    dim = 2 ** n_sites
    out = np.eye(dim, dtype=complex) * complex(op.constant)
    for coeff, (a, b) in op.terms:
        out += coeff * xi[a] @ xi[b]
    return out


def fock_vector(state: FockState) -> np.ndarray:
    """Basis vector of a Fock state in the full 2^N space."""
    dim = 2 ** state.n_sites
    idx = 0
    for s in state.occupied_sites:
        idx |= 1 << s
    v = np.zeros(dim)
    v[idx] = 1.0
    return v


# ---------------------------------------------------------------------------
# fixed-filling sector
# ---------------------------------------------------------------------------


@dataclass
class DenseSector:
    """Dense Hamiltonian of one fixed-filling sector with its eigenpairs."""

    spec: ModelSpec
    n_particles: int
    basis: list[int]  # bitmasks, ascending
    index: dict = field(repr=False)
    matrix: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)
    ham: QuadraticHamiltonian = field(repr=False)

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def state_vector(self, state: FockState) -> np.ndarray:
        mask = 0
        for s in state.occupied_sites:
            mask |= 1 << s
        if mask not in self.index:
            raise ValueError("state is not in this sector")
        v = np.zeros(self.dimension)
        v[self.index[mask]] = 1.0
        return v

    def one_body(self, m: np.ndarray) -> np.ndarray:
        """Dense sector matrix of sum m_pq a_p^dag a_q."""
        return _sector_one_body(self.basis, self.index, np.asarray(m))

    def operator(self, op: MajoranaMonomialSum) -> np.ndarray:
        """Dense sector matrix of an observable (complete, constant included)."""
        if op.fermion_matrix is not None:
            return self.one_body(op.fermion_matrix)
        if not op.terms:
            return complex(op.constant) * np.eye(self.dimension)
        raise ValueError("sector operators need a fermion one-body matrix")


def _hop_element(mask: int, p: int, q: int):
    """a_p^dag a_q |mask> -> (sign, new_mask) or None."""
    if not (mask >> q) & 1:
        return None
    sign = (-1) ** bin(mask & ((1 << q) - 1)).count("1")
    mid = mask ^ (1 << q)
    if (mid >> p) & 1:
        return None
    sign *= (-1) ** bin(mid & ((1 << p) - 1)).count("1")
    return sign, mid | (1 << p)


def _sector_one_body(basis, index, m) -> np.ndarray:
    dim = len(basis)
    out = np.zeros((dim, dim), dtype=complex)
    nz = np.argwhere(m != 0)
    for j, mask in enumerate(basis):
        for p, q in nz:
            hop = _hop_element(mask, int(p), int(q))
            if hop is None:
                continue
            sign, new_mask = hop
            out[index[new_mask], j] += m[p, q] * sign
    return out


def build_sector(
    spec: ModelSpec, n_particles: int, cap: int = SECTOR_DIMENSION_CAP
) -> DenseSector:
    """Dense fixed-filling sector of the lattice model."""
    dim = math.comb(spec.n_sites, n_particles)
    if dim > cap:
        raise ValueError(f"sector dimension {dim} exceeds cap {cap}")
    ham = build_hamiltonian(spec)
    basis = [
        sum(1 << s for s in occ)
        for occ in combinations(range(spec.n_sites), n_particles)
    ]
    basis.sort()
    index = {mask: i for i, mask in enumerate(basis)}
    mat = _sector_one_body(basis, index, ham.h) + ham.offset * np.eye(dim)
    if np.abs(mat - mat.conj().T).max() > 1e-12:
        raise AssertionError("sector Hamiltonian is not Hermitian")
    vals, vecs = np.linalg.eigh(mat)
    return DenseSector(
        spec=spec,
        n_particles=n_particles,
        basis=basis,
        index=index,
        matrix=mat,
        eigenvalues=vals,
        eigenvectors=vecs,
        ham=ham,
    )


# ---------------------------------------------------------------------------
# exact filtered values and Lehmann sums
# ---------------------------------------------------------------------------


def exact_filtered_value(
    sector: DenseSector,
    state: FockState,
    observable: MajoranaMonomialSum,
    spec: FilterSpec,
) -> float:
    """Filtered expectation with the exact Gaussian of the sector Hamiltonian."""
    gauss = np.exp(
        -((sector.eigenvalues - spec.energy) ** 2) / (2.0 * spec.width ** 2)
    ) / math.sqrt(2.0 * math.pi * spec.width ** 2)
    v = sector.eigenvectors @ (
        gauss * (sector.eigenvectors.conj().T @ sector.state_vector(state))
    )
    norm = float(np.real(v.conj() @ v))
    if norm <= 0:
        raise ArithmeticError("filtered state has zero norm")
    a_mat = sector.operator(observable)
    return float(np.real(v.conj() @ a_mat @ v) / norm)


def _half_line_gaussian_integral(freq: np.ndarray, sigma: float) -> np.ndarray:
    """int_0^inf e^{i freq t - t^2/(2 sigma^2)} dt = sigma sqrt(pi/2) w(sigma freq / sqrt 2)."""
    return sigma * math.sqrt(math.pi / 2.0) * wofz(sigma * freq / math.sqrt(2.0))


def lehmann_lambda(
    sector: DenseSector,
    rho0: np.ndarray,
    omegas: np.ndarray,
    sigma: float,
    current_matrix: np.ndarray | None = None,
) -> SeriesRecord:
    """Lambda(omega) as an explicit eigenpair double sum with the Gaussian
    cutoff folded in analytically (Faddeeva function)."""
    from .model import current_matrix as default_current

    omegas = np.asarray(omegas, dtype=float)
    m = (
        sector.one_body(default_current(sector.spec))
        if current_matrix is None
        else sector.one_body(current_matrix)
    )
    vecs = sector.eigenvectors
    vals = sector.eigenvalues
    jm = vecs.conj().T @ m @ vecs
    p = np.real(np.diag(vecs.conj().T @ np.asarray(rho0) @ vecs))
    w2 = np.abs(jm) ** 2
    freq = vals[:, None] - vals[None, :]  # E_m - E_n
    weight = p[:, None] * w2
    out = np.empty(len(omegas), dtype=complex)
    for i, omega in enumerate(omegas):
        plus = _half_line_gaussian_integral(freq.ravel() - omega, sigma)
        minus = _half_line_gaussian_integral(-freq.ravel() - omega, sigma)
        out[i] = -1j * np.sum(weight.ravel() * (plus - minus))
    return SeriesRecord(
        grid=omegas,
        values=out,
        meta={"kind": "lambda_lehmann", "sigma": sigma},
    )


# ---------------------------------------------------------------------------
# Kubo linear-response check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PerturbationSpec:
    """Drive H(t) = H0 + g(t) B with g sampled on `times` and initial rho0."""

    times: np.ndarray
    amplitude: np.ndarray  # g(t) samples
    coupling: np.ndarray  # dense B in the sector basis
    rho0: np.ndarray

    def __post_init__(self):
        if len(self.times) != len(self.amplitude):
            raise ValueError("amplitude must be sampled on the time grid")

    def scaled(self, factor: float) -> "PerturbationSpec":
        return PerturbationSpec(
            self.times, factor * np.asarray(self.amplitude), self.coupling, self.rho0
        )


def kubo_check(
    sector: DenseSector,
    pert: PerturbationSpec,
    observable: np.ndarray,
    times: np.ndarray | None = None,
) -> tuple[SeriesRecord, SeriesRecord, float]:
    """Exact perturbed response against the linear-response convolution.

    Returns (dA_exact, dA_linear, max |difference|).  The exact path
    integrates the time-ordered Schroedinger propagator with fixed-step RK4
    (step <= 0.01 / spectral radius); the linear path convolves g with the
    exact commutator kernel of the unperturbed problem.
    """
    times = pert.times if times is None else np.asarray(times, dtype=float)
    h0 = sector.matrix
    vals = sector.eigenvalues
    vecs = sector.eigenvectors
    b = np.asarray(pert.coupling)
    a = np.asarray(observable)
    rho0 = np.asarray(pert.rho0)
    radius = max(np.abs(vals).max(), 1.0)
    g_of = lambda t: np.interp(t, pert.times, pert.amplitude)

    # interaction-picture operators in the eigenbasis
    a_eig = vecs.conj().T @ a @ vecs
    b_eig = vecs.conj().T @ b @ vecs
    rho_eig = vecs.conj().T @ rho0 @ vecs
    phase = lambda t: np.exp(1j * vals * t)

    def heis(mat: np.ndarray, t: float) -> np.ndarray:
        ph = phase(t)
        return (ph[:, None] * mat) * ph.conj()[None, :]

    # linear response: dA(t) = int_0^t g(t') chi(t, t') dt'
    lin = np.zeros(len(times))
    for i, t in enumerate(times):
        if t == 0 or i == 0:
            continue
        tps = times[: i + 1]
        a_t = heis(a_eig, t)
        chi = np.empty(len(tps))
        for j, tp in enumerate(tps):
            b_tp = heis(b_eig, tp)
            comm = a_t @ b_tp - b_tp @ a_t
            chi[j] = np.real(-1j * np.trace(comm @ rho_eig))
        lin[i] = float(np.trapezoid(g_of(tps) * chi, tps))

    # exact response: RK4 on the full propagator
    dim = sector.dimension
    u = np.eye(dim, dtype=complex)
    step = 0.01 / radius
    exact = np.zeros(len(times))
    t_now = 0.0

    def rhs(t, mat):
        return -1j * ((h0 + g_of(t) * b) @ mat)

    for i, t in enumerate(times):
        while t_now < t - 1e-12:
            dt = min(step, t - t_now)
            k1 = rhs(t_now, u)
            k2 = rhs(t_now + dt / 2, u + dt / 2 * k1)
            k3 = rhs(t_now + dt / 2, u + dt / 2 * k2)
            k4 = rhs(t_now + dt, u + dt * k3)
            u = u + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t_now += dt
        rho_t = u @ rho0 @ u.conj().T
        a_free = np.real(np.einsum("ij,ji->", heis(a_eig, t), rho_eig))
        exact[i] = float(np.real(np.trace(a @ rho_t))) - a_free
    dev = float(np.abs(exact - lin).max())
    rec_e = SeriesRecord(grid=times, values=exact.astype(complex),
                         meta={"kind": "kubo_exact"})
    rec_l = SeriesRecord(grid=times, values=lin.astype(complex),
                         meta={"kind": "kubo_linear"})
    return rec_e, rec_l, dev


def response_kernel(
    sector: DenseSector,
    rho0: np.ndarray,
    a_mat: np.ndarray,
    b_mat: np.ndarray,
    times: np.ndarray,
    tprimes: np.ndarray,
) -> np.ndarray:
    """chi(t, t') = -i Tr([A(t), B(t')] rho0) on a (t, t') grid."""
    vals = sector.eigenvalues
    vecs = sector.eigenvectors
    a_eig = vecs.conj().T @ np.asarray(a_mat) @ vecs
    b_eig = vecs.conj().T @ np.asarray(b_mat) @ vecs
    rho_eig = vecs.conj().T @ np.asarray(rho0) @ vecs
    out = np.empty((len(times), len(tprimes)))
    for i, t in enumerate(times):
        ph = np.exp(1j * vals * t)
        a_t = (ph[:, None] * a_eig) * ph.conj()[None, :]
        for j, tp in enumerate(tprimes):
            php = np.exp(1j * vals * tp)
            b_tp = (php[:, None] * b_eig) * php.conj()[None, :]
            comm = a_t @ b_tp - b_tp @ a_t
            out[i, j] = float(np.real(-1j * np.trace(comm @ rho_eig)))
    return out


def circuit_c_identity_check(
    sector: DenseSector,
    state: FockState,
    a_op: MajoranaMonomialSum,
    b_op: MajoranaMonomialSum,
    t1: float,
    t2: float,
    t3: float,
) -> float:
    """Deviation of the post-selection identity
    <psi|e^{iHt1} A e^{iHt2} B e^{iHt3}|psi> * f(tau) = (product quantity),
    checking that dividing the product by the echo recovers the correlator
    computed through the covariance machinery."""
    from .response import three_time_correlator

    vecs = sector.eigenvectors
    vals = sector.eigenvalues
    psi = sector.state_vector(state)
    psi_e = vecs.conj().T @ psi
    a_m = sector.operator(a_op)
    b_m = sector.operator(b_op)

    def evolve(vec, t):
        return vecs @ (np.exp(1j * vals * t) * (vecs.conj().T @ vec))

    tau = t1 + t2 + t3
    ket = evolve(b_m @ evolve(psi, t3), t2)
    ket = evolve(a_m @ ket, t1)
    c_dense = complex(psi.conj() @ ket)
    echo = complex(psi_e.conj() @ (np.exp(-1j * vals * tau) * psi_e))
    product = c_dense * echo
    if abs(echo) < 1e-12:
        raise ArithmeticError(
            f"Loschmidt echo magnitude {abs(echo):.2e} < 1e-12: division undefined"
        )
    c_gauss = three_time_correlator(state, sector.ham, a_op, b_op, t1, t2, t3)
    dev1 = abs(product - c_gauss * echo)
    dev2 = abs(product / echo - c_gauss)
    return float(max(dev1, dev2))

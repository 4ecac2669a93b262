"""Majorana-basis linear algebra for Gaussian states of quadratic fermion
Hamiltonians: covariance matrices, Pfaffians, Wick sums, orthogonal time
evolution, and traces of products of Gaussian operators.

Conventions, fixed here for the whole package:

    xi_{2j}   = a_j + a_j^dag
    xi_{2j+1} = -i (a_j - a_j^dag)

with 0-based site index j, modes interleaved per site, {xi_n, xi_m} = 2 d_nm.
The covariance matrix of a state rho is

    gamma_nm = -i (<xi_n xi_m> - d_nm),

so a Fock state carries 2x2 blocks [[0, s_j], [-s_j, 0]] with s_j = +1 on an
empty site and -1 on an occupied one, and tr[rho xi_{i1} ... xi_{iK}]
= Pf(i gamma_{i1..iK}) for strictly increasing indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatchError, OrthogonalStatesError

HERMITICITY_TOL = 1e-12
ANTISYMMETRY_TOL = 1e-12
PURITY_TOL = 1e-10


class QuadraticHamiltonian:
    """Number-conserving quadratic Hamiltonian H = sum_nm h_nm a_n^dag a_m + offset.

    `h` must be Hermitian; energies are in units of the hopping J.  The
    eigendecomposition is computed once and cached, since filters and time
    grids reuse it thousands of times.
    """

    def __init__(self, h: np.ndarray, offset: float = 0.0):
        h = np.asarray(h)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise DimensionMismatchError(f"h must be square, got {h.shape}")
        if np.abs(h - h.conj().T).max() > HERMITICITY_TOL:
            raise ValueError("single-particle matrix is not Hermitian to 1e-12")
        self._h = h.copy()
        self._h.flags.writeable = False
        self.offset = float(offset)
        self._eig: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def n_sites(self) -> int:
        return self._h.shape[0]

    @property
    def n_modes(self) -> int:
        return 2 * self._h.shape[0]

    @property
    def h(self) -> np.ndarray:
        return self._h

    @property
    def eigensystem(self) -> tuple[np.ndarray, np.ndarray]:
        """Ascending eigenvalues and eigenvector columns of h (cached)."""
        if self._eig is None:
            vals, vecs = np.linalg.eigh(self._h)
            vals.flags.writeable = False
            vecs.flags.writeable = False
            self._eig = (vals, vecs)
        return self._eig

    def propagator(self, t: float) -> np.ndarray:
        """Single-particle propagator exp(-i h t)."""
        vals, vecs = self.eigensystem
        return (vecs * np.exp(-1j * vals * t)) @ vecs.conj().T

    def spectral_bounds(self) -> tuple[float, float]:
        """(min, max) many-body eigenvalue over the full Fock space."""
        vals, _ = self.eigensystem
        lo = self.offset + vals[vals < 0].sum()
        hi = self.offset + vals[vals > 0].sum()
        return float(lo), float(hi)

    def sector_bounds(self, n_particles: int) -> tuple[float, float]:
        """(min, max) many-body eigenvalue in the fixed-filling sector."""
        vals, _ = self.eigensystem
        if not 0 <= n_particles <= self.n_sites:
            raise ValueError("filling out of range")
        lo = self.offset + vals[:n_particles].sum()
        hi = self.offset + vals[self.n_sites - n_particles:].sum()
        return float(lo), float(hi)

    def __repr__(self) -> str:
        return f"QuadraticHamiltonian(n_sites={self.n_sites}, offset={self.offset})"


@dataclass(frozen=True)
class FockState:
    """Occupation bit-vector of a position-basis Fock state."""

    occupations: tuple[int, ...]

    def __post_init__(self):
        if any(o not in (0, 1) for o in self.occupations):
            raise ValueError("occupations must be 0/1")

    @classmethod
    def from_occupied(cls, n_sites: int, occupied: Iterable[int]) -> "FockState":
        occ = [0] * n_sites
        for s in occupied:
            occ[s] = 1
        return cls(tuple(occ))

    @property
    def n_sites(self) -> int:
        return len(self.occupations)

    @property
    def n_particles(self) -> int:
        return sum(self.occupations)

    @property
    def occupied_sites(self) -> tuple[int, ...]:
        return tuple(i for i, o in enumerate(self.occupations) if o)


@dataclass(frozen=True)
class MajoranaCovariance:
    """Real antisymmetric 2N x 2N covariance matrix of a Gaussian state."""

    gamma: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gamma)
        if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] % 2:
            raise DimensionMismatchError(f"covariance must be 2N x 2N, got {g.shape}")
        if np.abs(g + g.T).max() > ANTISYMMETRY_TOL * max(1.0, np.abs(g).max()):
            raise ValueError("covariance is not antisymmetric to 1e-12")
        g = g.copy()
        g.flags.writeable = False
        object.__setattr__(self, "gamma", g)

    @property
    def n_modes(self) -> int:
        return self.gamma.shape[0]

    def purity_defect(self) -> float:
        """max |gamma @ gamma + 1|; 0 for pure states (tolerance 1e-10)."""
        g = self.gamma
        return float(np.abs(g @ g + np.eye(g.shape[0])).max())

    @property
    def is_pure(self) -> bool:
        return self.purity_defect() <= PURITY_TOL


def _as_gamma(g) -> np.ndarray:
    return g.gamma if isinstance(g, MajoranaCovariance) else np.asarray(g)


@dataclass(frozen=True)
class MajoranaMonomialSum:
    """Quadratic observable A = const + sum_{n<m} c_nm xi_n xi_m.

    Terms are stored index-normalized (n < m); a Hermitian observable has
    purely imaginary coefficients and a real constant.  `fermion_matrix`
    keeps the a^dag a representation when the observable was built from one,
    which the eigenbasis kernels exploit.
    """

    n_modes: int
    terms: tuple[tuple[complex, tuple[int, int]], ...]
    constant: complex = 0.0
    fermion_matrix: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        norm = []
        for coeff, (n, m) in self.terms:
            if n == m:
                raise ValueError("diagonal Majorana monomials (n, n) are not allowed")
            if not (0 <= n < self.n_modes and 0 <= m < self.n_modes):
                raise ValueError("monomial index out of range")
            if n > m:
                n, m, coeff = m, n, -coeff
            norm.append((complex(coeff), (n, m)))
        object.__setattr__(self, "terms", tuple(norm))
        if self.fermion_matrix is not None:
            fm = np.asarray(self.fermion_matrix).copy()
            fm.flags.writeable = False
            object.__setattr__(self, "fermion_matrix", fm)

    @classmethod
    def identity(cls, n_modes: int) -> "MajoranaMonomialSum":
        return cls(n_modes, (), 1.0)

    @classmethod
    def from_fermion_matrix(cls, m: np.ndarray) -> "MajoranaMonomialSum":
        """Majorana form of A = sum_pq m_pq a_p^dag a_q."""
        m = np.asarray(m, dtype=complex)
        n = m.shape[0]
        terms = []
        const = 0.0 + 0.0j
        for p in range(n):
            for q in range(n):
                c = m[p, q]
                if c == 0:
                    continue
                if p == q:
                    const += c / 2
                    terms.append((1j * c / 2, (2 * p, 2 * p + 1)))
                else:
                    terms.append((c / 4, (2 * p, 2 * q)))
                    terms.append((1j * c / 4, (2 * p, 2 * q + 1)))
                    terms.append((-1j * c / 4, (2 * p + 1, 2 * q)))
                    terms.append((c / 4, (2 * p + 1, 2 * q + 1)))
        return cls(2 * n, tuple(terms), const, fermion_matrix=m)

    def coefficient_matrix(self) -> np.ndarray:
        """Antisymmetric C with A = (1/2) xi^T C xi + const."""
        c = np.zeros((self.n_modes, self.n_modes), dtype=complex)
        for coeff, (n, m) in self.terms:
            c[n, m] += coeff
            c[m, n] -= coeff
        return c

    def rotated(self, o: np.ndarray) -> "MajoranaMonomialSum":
        """Heisenberg image under xi_n -> sum_m o_nm xi_m."""
        c = o.T @ self.coefficient_matrix() @ o
        iu = np.triu_indices(self.n_modes, k=1)
        terms = tuple(
            (c[n, m], (int(n), int(m)))
            for n, m in zip(*iu)
            if c[n, m] != 0
        )
        return MajoranaMonomialSum(self.n_modes, terms, self.constant)

    def expectation(self, cov) -> complex:
        """<A> in the Gaussian state/functional with covariance `cov`."""
        g = _as_gamma(cov)
        val = complex(self.constant)
        for coeff, (n, m) in self.terms:
            val += coeff * 1j * g[n, m]
        return val

    @property
    def is_hermitian(self) -> bool:
        return (
            abs(complex(self.constant).imag) < 1e-12
            and all(abs(c.real) < 1e-12 for c, _ in self.terms)
        )


def fock_covariance(state: FockState) -> MajoranaCovariance:
    """Covariance of a Fock state: s_j = +1 empty, -1 occupied."""
    n = state.n_sites
    g = np.zeros((2 * n, 2 * n))
    for j, occ in enumerate(state.occupations):
        s = -1.0 if occ else 1.0
        g[2 * j, 2 * j + 1] = s
        g[2 * j + 1, 2 * j] = -s
    return MajoranaCovariance(g)


def orthogonal_block_embedding(u: np.ndarray) -> np.ndarray:
    """Real 2N x 2N image of a unitary single-particle map, interleaved layout."""
    n = u.shape[0]
    o = np.zeros((2 * n, 2 * n))
    o[0::2, 0::2] = u.real
    o[0::2, 1::2] = -u.imag
    o[1::2, 0::2] = u.imag
    o[1::2, 1::2] = u.real
    return o


def orthogonal_evolution(ham: QuadraticHamiltonian, t: float) -> np.ndarray:
    """O(t) with xi_n(t) = e^{iHt} xi_n e^{-iHt} = sum_m O(t)_nm xi_m.

    Covariances of evolved states transform as gamma(t) = O(t) gamma O(t)^T.
    """
    if not np.isfinite(t):
        raise ValueError("time must be finite")
    return orthogonal_block_embedding(ham.propagator(t))


def evolve_covariance(cov, o: np.ndarray) -> MajoranaCovariance:
    """O gamma O^T; preserves antisymmetry and purity."""
    g = _as_gamma(cov)
    if o.shape != g.shape:
        raise DimensionMismatchError(
            f"orthogonal matrix {o.shape} does not match covariance {g.shape}"
        )
    out = o @ g @ o.T
    return MajoranaCovariance((out - out.T) / 2)


def pfaffian(mat: np.ndarray) -> complex | float:
    """Pfaffian of a skew-symmetric matrix.

    Skew-symmetric tridiagonalization with partial pivoting (Parlett-Reid),
    O(n^3); returns a real number for real input and satisfies
    Pf(M)^2 = det(M).
    """
    m = np.asarray(mat)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatchError(f"matrix must be square, got {m.shape}")
    n = m.shape[0]
    if n % 2:
        raise ValueError("Pfaffian needs even dimension")
    scale = max(1.0, float(np.abs(m).max()))
    if np.abs(m + m.T).max() > 1e-10 * scale:
        raise ValueError("matrix is not skew-symmetric")
    if n == 0:
        return 1.0
    real_input = not np.iscomplexobj(m)
    a = np.array(m, dtype=float if real_input else complex)
    val = 1.0 + 0.0j if not real_input else 1.0
    for k in range(0, n - 1, 2):
        piv = k + 1 + int(np.abs(a[k + 1:, k]).argmax())
        if piv != k + 1:
            a[[k + 1, piv], k:] = a[[piv, k + 1], k:]
            a[k:, [k + 1, piv]] = a[k:, [piv, k + 1]]
            val = -val
        if a[k + 1, k] == 0.0:
            return 0.0
        val = val * a[k, k + 1]
        if k + 2 < n:
            tau = a[k, k + 2:] / a[k, k + 1]
            col = a[k + 2:, k + 1]
            a[k + 2:, k + 2:] += np.outer(tau, col)
            a[k + 2:, k + 2:] -= np.outer(col, tau)
    return val


def wick_expectation(cov, indices: Sequence[int]) -> complex:
    """tr[rho xi_{i1} ... xi_{iK}] = Pf(i gamma_{i1..iK}), i1 < ... < iK."""
    g = _as_gamma(cov)
    idx = list(indices)
    if len(idx) == 0:
        return 1.0 + 0.0j
    if len(idx) % 2:
        raise ValueError("need an even number of Majorana insertions")
    if any(idx[i] >= idx[i + 1] for i in range(len(idx) - 1)):
        raise ValueError("indices must be strictly increasing")
    sub = 1j * g[np.ix_(idx, idx)]
    return complex(pfaffian(sub))


def two_state_overlap_trace(
    cov1,
    cov2,
    indices: Sequence[int] = (),
    singular_tol: float = 1e-12,
) -> complex:
    """tr[rho_2 rho_1 xi_{i1} ... xi_{iK}] for two pure Gaussian states.

    The base value tr[rho_2 rho_1] = |<psi_2|psi_1>|^2 is
    2^{-N} Pf(gamma_1 + gamma_2) Pf(gamma_1); insertions multiply it by
    Pf(i D*_{i1..iK}) with D = (-2 I + i gamma_1 - i gamma_2)(gamma_1 + gamma_2)^{-1}.

    Raises OrthogonalStatesError when gamma_1 + gamma_2 is singular to within
    `singular_tol` times its norm (near-orthogonal states); callers may treat
    the result as 0 when the Loschmidt echo magnitude is below 1e-10.
    """
    g1 = _as_gamma(cov1)
    g2 = _as_gamma(cov2)
    if g1.shape != g2.shape:
        raise DimensionMismatchError("covariance shapes differ")
    n = g1.shape[0] // 2
    gsum = g1 + g2
    smin = np.linalg.svd(gsum, compute_uv=False)[-1]
    norm = max(np.abs(gsum).max(), 1e-300)
    if smin < singular_tol * norm:
        raise OrthogonalStatesError(
            f"gamma_1 + gamma_2 singular (s_min/|.| = {smin / norm:.2e}): "
            "states are (near-)orthogonal"
        )
    base = 2.0 ** (-n) * pfaffian(gsum) * pfaffian(g1)
    idx = list(indices)
    if not idx:
        return complex(base)
    if len(idx) % 2:
        raise ValueError("need an even number of Majorana insertions")
    if any(idx[i] >= idx[i + 1] for i in range(len(idx) - 1)):
        raise ValueError("indices must be strictly increasing")
    eye = np.eye(2 * n)
    delta = (-2 * eye + 1j * g1 - 1j * g2) @ np.linalg.inv(gsum)
    delta = (delta - delta.T) / 2
    sub = (1j * delta.conj())[np.ix_(idx, idx)]
    return complex(base * pfaffian(sub))


def gaussian_trace_phase(ham: QuadraticHamiltonian, t: float) -> complex:
    """tr[e^{-iHt}] over the full 2^N Fock space."""
    vals, _ = ham.eigensystem
    return complex(
        np.exp(-1j * ham.offset * t) * np.prod(1.0 + np.exp(-1j * vals * t))
    )


def covariance_from_correlations(corr: np.ndarray) -> np.ndarray:
    """Majorana covariance from the fermion correlation matrix C_pq = <a_p^dag a_q>.

    Valid for number-conserving (generally non-Hermitian) Gaussian functionals;
    the result is complex antisymmetric in general.
    """
    n = corr.shape[0]
    eye = np.eye(n)
    blk_ee = -1j * (corr - corr.T)
    blk_eo = eye - corr - corr.T
    g = np.zeros((2 * n, 2 * n), dtype=complex)
    g[0::2, 0::2] = blk_ee
    g[0::2, 1::2] = blk_eo
    g[1::2, 0::2] = -blk_eo.T
    g[1::2, 1::2] = blk_ee
    return g


def evolution_operator_covariance(
    ham: QuadraticHamiltonian, t: float, number_angle: float = 0.0
) -> np.ndarray:
    """Generalized covariance of e^{-i(Ht - number_angle * Nhat)} / trace.

    In the eigenbasis the mode occupations are 1 / (1 + e^{i(eps_j t - angle)});
    the returned matrix feeds Wick sums for traces against this operator.
    """
    vals, vecs = ham.eigensystem
    occ = 1.0 / (1.0 + np.exp(1j * (vals * t - number_angle)))
    corr = (vecs.conj() * occ) @ vecs.T
    return covariance_from_correlations(corr)


def pure_state_evolution_trace(cov, ham: QuadraticHamiltonian, t: float) -> complex:
    """tr[rho_psi e^{-iHt}] for a pure Gaussian rho_psi: the Loschmidt echo
    evaluated as a trace of a product of two Gaussian operators."""
    g = _as_gamma(cov)
    n = g.shape[0] // 2
    gt = evolution_operator_covariance(ham, t)
    trace = gaussian_trace_phase(ham, t)
    return complex(trace * pfaffian(g) * 2.0 ** (-n) * pfaffian(g + gt))

"""Disordered free-fermion chains: mosaic Aubry-Andre, plain AA, and Anderson
potentials on a periodic ring, with current/kinetic observables and
localization diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaussian import MajoranaMonomialSum, QuadraticHamiltonian

GOLDEN_RATIO = (np.sqrt(5.0) + 1.0) / 2.0

POTENTIALS = ("mosaic-aa", "aa", "anderson")


@dataclass(frozen=True)
class ModelSpec:
    """Lattice model parameters.

    The chain is H = -J sum_n (a_n^dag a_{n+1} + h.c.) - lam * sum_n eps_n n_n
    with periodic wrap a_{N+1} = a_1.  Site indexing in eps_n starts at n = 1,
    so the mosaic condition is (site index) mod kappa == 0.
    """

    n_sites: int
    hopping: float = 1.0
    lam: float = 2.0
    beta: float = GOLDEN_RATIO
    kappa: int = 2
    potential: str = "mosaic-aa"
    seed: int = 0
    phase: float = 0.0

    def __post_init__(self):
        if self.n_sites < 2:
            raise ValueError("need at least 2 sites")
        if self.kappa < 1:
            raise ValueError("kappa must be a positive integer")
        if self.hopping <= 0:
            raise ValueError("hopping J must be positive")
        if self.potential not in POTENTIALS:
            raise ValueError(f"unknown potential {self.potential!r}")


def onsite_potential(spec: ModelSpec) -> np.ndarray:
    """eps_n for n = 1..N (returned 0-indexed)."""
    n_idx = np.arange(1, spec.n_sites + 1)
    if spec.potential == "anderson":
        rng = np.random.default_rng(spec.seed)
        return rng.uniform(-1.0, 1.0, spec.n_sites)
    eps = np.cos(2.0 * np.pi * spec.beta * n_idx + spec.phase)
    if spec.potential == "mosaic-aa":
        eps = np.where(n_idx % spec.kappa == 0, eps, 0.0)
    return eps


def _bonds(n: int) -> list[tuple[int, int]]:
    # N=2 keeps a single bond so the periodic wrap does not duplicate it
    if n == 2:
        return [(0, 1)]
    return [(i, (i + 1) % n) for i in range(n)]


def build_hamiltonian(spec: ModelSpec) -> QuadraticHamiltonian:
    """Single-particle matrix of the ring: -J on bonds, -lam*eps_n on sites."""
    n = spec.n_sites
    h = np.zeros((n, n))
    for i, j in _bonds(n):
        h[i, j] = -spec.hopping
        h[j, i] = -spec.hopping
    h[np.diag_indices(n)] = -spec.lam * onsite_potential(spec)
    return QuadraticHamiltonian(h)


def current_matrix(spec: ModelSpec) -> np.ndarray:
    """Fermion matrix of j = i J sum_n (a_{n+1}^dag a_n - a_n^dag a_{n+1})."""
    n = spec.n_sites
    m = np.zeros((n, n), dtype=complex)
    for i, j in _bonds(n):
        m[j, i] += 1j * spec.hopping
        m[i, j] += -1j * spec.hopping
    return m


def kinetic_matrix(spec: ModelSpec) -> np.ndarray:
    """Fermion matrix of K = -J sum_n (a_{n+1}^dag a_n + a_n^dag a_{n+1})."""
    n = spec.n_sites
    m = np.zeros((n, n), dtype=complex)
    for i, j in _bonds(n):
        m[j, i] += -spec.hopping
        m[i, j] += -spec.hopping
    return m


def current_operator(spec: ModelSpec) -> MajoranaMonomialSum:
    """Current observable in Majorana form (Hermitian, trace-free)."""
    return MajoranaMonomialSum.from_fermion_matrix(current_matrix(spec))


def kinetic_operator(spec: ModelSpec) -> MajoranaMonomialSum:
    """Kinetic-energy observable in Majorana form (Hermitian, trace-free)."""
    return MajoranaMonomialSum.from_fermion_matrix(kinetic_matrix(spec))


def single_particle_spectrum(
    ham: QuadraticHamiltonian,
) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvector columns of h."""
    return ham.eigensystem


def mobility_edges(hopping: float, lam: float) -> tuple[float, float]:
    """Analytic mobility edges (-J/lam, +J/lam) of the kappa=2 mosaic model."""
    if lam == 0:
        raise ValueError("mobility edges undefined at lam = 0")
    e = hopping / lam
    return (-e, e)


def inverse_participation_ratio(vec: np.ndarray) -> float:
    """sum_n |v_n|^4 of a normalized vector; ~1/N extended, O(1) localized."""
    v = np.asarray(vec)
    norm = np.linalg.norm(v)
    if abs(norm - 1.0) > 1e-8:
        raise ValueError("vector must be normalized")
    return float(np.sum(np.abs(v) ** 4))


def localization_scan(
    spec_small: ModelSpec, spec_large: ModelSpec, edge_margin: float = 0.0
) -> dict:
    """Two-size IPR comparison classifying states against the +-J/lam edges.

    States of the larger system are paired with the energetically closest
    state of the smaller one; a state is called extended when its IPR grows
    under the size reduction by more than sqrt(N_large/N_small), the
    geometric midpoint between the 1/N (extended) and constant (localized)
    scalings.  Returns the misclassification fraction against the analytic
    edges, ignoring states within `edge_margin` of an edge.
    """
    e_small, v_small = build_hamiltonian(spec_small).eigensystem
    e_large, v_large = build_hamiltonian(spec_large).eigensystem
    ipr_small = np.sum(np.abs(v_small) ** 4, axis=0)
    ipr_large = np.sum(np.abs(v_large) ** 4, axis=0)
    lo, hi = mobility_edges(spec_small.hopping, spec_small.lam)

    ratio_threshold = np.sqrt(spec_large.n_sites / spec_small.n_sites)
    idx = np.searchsorted(e_small, e_large).clip(1, len(e_small) - 1)
    nearer = np.where(
        np.abs(e_small[idx] - e_large) < np.abs(e_small[idx - 1] - e_large),
        idx,
        idx - 1,
    )
    ratio = ipr_small[nearer] / ipr_large
    predicted_extended = ratio > ratio_threshold
    analytic_extended = (e_large > lo) & (e_large < hi)
    considered = (np.abs(e_large - lo) > edge_margin) & (
        np.abs(e_large - hi) > edge_margin
    )
    wrong = (predicted_extended != analytic_extended) & considered
    return {
        "energies": e_large,
        "ipr_large": ipr_large,
        "ipr_ratio": ratio,
        "predicted_extended": predicted_extended,
        "analytic_extended": analytic_extended,
        "considered": considered,
        "misclassified_fraction": float(wrong.sum() / max(considered.sum(), 1)),
    }

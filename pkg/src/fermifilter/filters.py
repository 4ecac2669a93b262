"""Gaussian energy filters: exact dense form, Riemann-sum discretization,
filtered expectation values, LDOS/DOS reconstruction, and fixed-filling
number projection."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import OverlapFloorError
from .gaussian import (
    FockState,
    MajoranaMonomialSum,
    QuadraticHamiltonian,
    fock_covariance,
    orthogonal_evolution,
    pfaffian,
)

DEFAULT_OVERLAP_FLOOR = 1e-10
DENSE_DIMENSION_CAP = 4096


@dataclass(frozen=True)
class FilterSpec:
    """Discrete Gaussian filter: target energy, width, time step, cutoff.

    The discrete filter is sum_{k=-K}^{K} w_k e^{-iH t_k} with t_k = k*dt and
    w_k = dt/(2 pi) e^{i E t_k} e^{-(width*dt)^2 k^2 / 2}; it approximates the
    unit-normalized Gaussian of H with the stated width.
    """

    energy: float
    width: float
    time_step: float
    cutoff: int

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("filter width must be positive")
        if self.time_step <= 0:
            raise ValueError("time step must be positive")
        if self.cutoff < 1:
            raise ValueError("cutoff must be at least 1")
        kdt = self.cutoff * self.width * self.time_step
        if kdt < 4:
            raise ValueError(
                f"K*width*dt = {kdt:.2f} < 4: truncation error not controlled"
            )
        if kdt < 6:
            warnings.warn(
                f"K*width*dt = {kdt:.2f} < 6: truncation error ~ e^-{kdt ** 2 / 2:.0f}",
                stacklevel=2,
            )

    @classmethod
    def auto(
        cls,
        ham: QuadraticHamiltonian,
        energy: float,
        width: float,
        n_particles: int | None = None,
        radius: float | None = None,
        resolution: float = 6.0,
    ) -> "FilterSpec":
        """Spec with dt = pi/(2R) and K = ceil(resolution/(width*dt)).

        R is the many-body half-range max(E_max - E, E - E_min) of the full
        Fock space (or the fixed-filling sector when `n_particles` is given),
        so the aliases of the Riemann sum stay outside the spectrum.
        """
        if radius is None:
            lo, hi = (
                ham.spectral_bounds()
                if n_particles is None
                else ham.sector_bounds(n_particles)
            )
            radius = max(hi - energy, energy - lo, 1e-9) + 2.0 * width
        dt = math.pi / (2.0 * radius)
        cutoff = max(1, math.ceil(resolution / (width * dt)))
        return cls(energy=energy, width=width, time_step=dt, cutoff=cutoff)

    def with_width(self, width: float) -> "FilterSpec":
        """Same grid, different width (cutoff rescaled to keep K*width*dt)."""
        target = self.cutoff * self.width * self.time_step
        cutoff = max(1, math.ceil(target / (width * self.time_step)))
        return FilterSpec(self.energy, width, self.time_step, cutoff)


@dataclass(frozen=True)
class FilterWeights:
    """Times t_k = k*dt and weights w_k of the discrete filter, k = -K..K."""

    spec: FilterSpec
    times: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.times.flags.writeable = False
        self.weights.flags.writeable = False


def riemann_filter_weights(spec: FilterSpec) -> FilterWeights:
    """Discrete filter weights, conjugate-symmetric: w_{-k} = conj(w_k)."""
    k = np.arange(-spec.cutoff, spec.cutoff + 1)
    times = k * spec.time_step
    weights = (
        spec.time_step
        / (2.0 * np.pi)
        * np.exp(1j * spec.energy * times)
        * np.exp(-0.5 * (spec.width * spec.time_step) ** 2 * k ** 2)
    )
    return FilterWeights(spec=spec, times=times, weights=weights)


def dense_filter(target, spec: FilterSpec, cap: int = DENSE_DIMENSION_CAP):
    """Exact Gaussian filter (2 pi width^2)^{-1/2} exp(-(M-E)^2 / 2 width^2).

    `target` is a dense Hermitian matrix or a QuadraticHamiltonian (expanded
    to its full many-body matrix; oracle use only, hence the dimension cap).
    """
    if isinstance(target, QuadraticHamiltonian):
        from .oracle import many_body_hamiltonian

        mat = many_body_hamiltonian(target)
    else:
        mat = np.asarray(target)
    if mat.shape[0] > cap:
        raise ValueError(f"dense filter capped at dimension {cap}, got {mat.shape[0]}")
    vals, vecs = np.linalg.eigh(mat)
    gauss = np.exp(-((vals - spec.energy) ** 2) / (2.0 * spec.width ** 2))
    gauss /= np.sqrt(2.0 * np.pi * spec.width ** 2)
    return (vecs * gauss) @ vecs.conj().T


def _covariance_bank(ham: QuadraticHamiltonian, state: FockState, times):
    gamma0 = fock_covariance(state).gamma
    out = []
    for t in times:
        o = orthogonal_evolution(ham, t)
        out.append(o @ gamma0 @ o.T)
    return out


def filtered_expectation(
    state: FockState,
    observable: MajoranaMonomialSum,
    spec: FilterSpec,
    ham: QuadraticHamiltonian,
    floor: float = DEFAULT_OVERLAP_FLOOR,
) -> float:
    """Expectation of `observable` in the filtered state P|psi> / ||P|psi>||.

    Double filter sum over (k, k'), each term evaluated through the
    two-state overlap trace with the observable's Majorana monomials.
    """
    fw = riemann_filter_weights(spec)
    n = ham.n_sites
    # bra side: covariance of e^{+iH t_k}|psi>; ket side: e^{-iH t_k'}|psi>
    bras = _covariance_bank(ham, state, -fw.times)
    kets = _covariance_bank(ham, state, fw.times)
    coeff = observable.coefficient_matrix()
    const = complex(observable.constant)
    nk = len(fw.times)
    taus = fw.times[:, None] + fw.times[None, :]
    echos = kernels.loschmidt_series(ham, state, taus.ravel()).reshape(nk, nk)
    den = complex(fw.weights @ echos @ fw.weights)
    num = 0.0 + 0.0j
    eye = np.eye(2 * n)
    for ki in range(nk):
        g1 = bras[ki]
        for kj in range(nk):
            f = echos[ki, kj]
            if abs(f) < DEFAULT_OVERLAP_FLOOR:
                continue  # treat near-orthogonal terms as zero
            g2 = kets[kj]
            w = fw.weights[ki] * fw.weights[kj]
            gsum = g1 + g2
            base = 2.0 ** (-n) * pfaffian(gsum) * pfaffian(g1)
            delta = (-2 * eye + 1j * g1 - 1j * g2) @ np.linalg.inv(gsum)
            delta = (delta - delta.T) / 2
            # Tr[rho2 rho1 A] = base * (const + sum c_nm i Delta*_nm)
            ins = const + 0.5j * np.tensordot(coeff, delta.conj())
            num += w * base * ins / f.conjugate()
    scale = 1.0 / (2.0 * np.pi * spec.width ** 2)
    if den.real < floor * scale:
        raise OverlapFloorError(
            "insufficient overlap with energy window: "
            f"<psi|P^2|psi> = {den.real:.3e} < {floor:.1e} * {scale:.3e}"
        )
    value = num / den
    return float(value.real)


def single_filter_expectation(
    state: FockState,
    observable: MajoranaMonomialSum,
    spec: FilterSpec,
    ham: QuadraticHamiltonian,
    floor: float = DEFAULT_OVERLAP_FLOOR,
) -> complex:
    """One-sided quantity <psi|A P|psi> / <psi|P|psi> (single time sum)."""
    fw = riemann_filter_weights(spec)
    n = ham.n_sites
    gamma0 = fock_covariance(state).gamma
    kets = _covariance_bank(ham, state, fw.times)
    coeff = observable.coefficient_matrix()
    const = complex(observable.constant)
    echos = kernels.loschmidt_series(ham, state, fw.times)
    num = 0.0 + 0.0j
    den = 0.0 + 0.0j
    eye = np.eye(2 * n)
    for ki in range(len(fw.times)):
        f = echos[ki]
        den += fw.weights[ki] * f
        if abs(f) < DEFAULT_OVERLAP_FLOOR:
            continue
        g2 = kets[ki]
        gsum = gamma0 + g2
        base = 2.0 ** (-n) * pfaffian(gsum) * pfaffian(gamma0)
        delta = (-2 * eye + 1j * gamma0 - 1j * g2) @ np.linalg.inv(gsum)
        delta = (delta - delta.T) / 2
        ins = const + 0.5j * np.tensordot(coeff, delta.conj())
        # <psi|A e^{-iHt}|psi> = Tr[rho2 rho1 A] / conj(f)
        num += fw.weights[ki] * base * ins / f.conjugate()
    scale = 1.0 / math.sqrt(2.0 * np.pi * spec.width ** 2)
    if abs(den) < floor * scale:
        raise OverlapFloorError(
            f"insufficient overlap with energy window: <psi|P|psi> = {abs(den):.3e}"
        )
    return complex(num / den)


def number_projector_phases(n_sites: int, n_particles: int):
    """(k, phase e^{-i 2 pi k n0/(N+1)}, angle 2 pi k/(N+1)) for k = 0..N."""
    if not 0 <= n_particles <= n_sites:
        raise ValueError("filling out of range")
    ks = np.arange(n_sites + 1)
    angles = 2.0 * np.pi * ks / (n_sites + 1)
    phases = np.exp(-1j * angles * n_particles)
    return [
        (int(k), complex(p), float(a)) for k, p, a in zip(ks, phases, angles)
    ]


def projected_trace(
    ham: QuadraticHamiltonian,
    t: float,
    n_particles: int,
    observable: MajoranaMonomialSum | None = None,
) -> complex:
    """Tr[e^{-iHt} delta_{N,n0} (A)] via the number-projector phase sum.

    Each term is a Gaussian trace of exp(-i(Ht - theta*N)); the observable is
    inserted through Wick contractions with the generalized covariance.
    """
    from .gaussian import evolution_operator_covariance, gaussian_trace_phase

    n = ham.n_sites
    vals, _ = ham.eigensystem
    total = 0.0 + 0.0j
    for _, pref, angle in number_projector_phases(n, n_particles):
        phase_trace = np.exp(-1j * ham.offset * t) * np.prod(
            1.0 + np.exp(-1j * (vals * t - angle))
        )
        term = pref / (n + 1) * phase_trace
        if observable is not None:
            if abs(phase_trace) < 1e-280:
                # expectation times a vanishing trace: evaluate stably
                term_ins = _projected_insertion_exact(
                    ham, t, angle, observable
                ) * pref / (n + 1)
                total += term_ins
                continue
            cov = evolution_operator_covariance(ham, t, angle)
            total += term * complex(observable.expectation(cov))
        else:
            total += term
    return complex(total)


def _projected_insertion_exact(ham, t, angle, observable):
    """Tr[e^{-i(Ht - angle*N)} A] when the bare trace vanishes."""
    vals, vecs = ham.eigensystem
    fm = observable.fermion_matrix
    if fm is None:
        raise ValueError(
            "stable projected insertion needs a fermion-matrix observable"
        )
    at = vecs.conj().T @ fm @ vecs
    phi = vals * t - angle
    g = 1.0 + np.exp(-1j * phi)
    _, p1, _ = kernels._leave_out_products(g)
    off = np.exp(-1j * ham.offset * t)
    return off * (np.diag(at) * np.exp(-1j * phi)) @ p1 + off * complex(
        observable.constant
    ) * (0.0 if np.abs(g).min() < 1e-280 else np.prod(g))


def ldos(
    state: FockState,
    ham: QuadraticHamiltonian,
    energies: np.ndarray,
    eta: float,
    filter_spec: FilterSpec | None = None,
    normalize: bool = True,
):
    """Local density of states d(E) ~ <Psi|P_eta(E)|Psi> from the Loschmidt echo.

    With `filter_spec` the LDOS of the filtered state P|Psi>/||P|Psi>|| is
    reconstructed instead; everything reduces to weighted sums of
    f_psi(t) on one uniform time grid.
    """
    from .response import SeriesRecord

    energies = np.asarray(energies, dtype=float)
    if eta <= 0:
        raise ValueError("smoothing width eta must be positive")
    lo, hi = ham.sector_bounds(state.n_particles)
    radius = max(
        hi - energies.min(), energies.max() - lo, 1e-9
    ) + 2.0 * eta
    if filter_spec is not None:
        dt = filter_spec.time_step
    else:
        dt = math.pi / (2.0 * radius)
    k_eta = max(1, math.ceil(6.0 / (eta * dt)))
    ks = np.arange(-k_eta, k_eta + 1)
    t_eta = ks * dt
    gauss_eta = (dt / (2.0 * np.pi)) * np.exp(-0.5 * (eta * dt) ** 2 * ks ** 2)

    if filter_spec is None:
        f = kernels.loschmidt_series(ham, state, t_eta)
        weighted = gauss_eta * f
    else:
        fw = riemann_filter_weights(filter_spec)
        kd = filter_spec.cutoff
        # double filter collapses to a lag correlation of f with w*w
        conv = np.convolve(fw.weights, fw.weights)  # lags -2K..2K
        t_all = np.arange(-(2 * kd + k_eta), 2 * kd + k_eta + 1) * dt
        f_all = kernels.loschmidt_series(ham, state, t_all)
        g = np.convolve(f_all, conv[::-1], mode="valid")  # g(t_m) = sum_s c_s f_{m+s}
        weighted = gauss_eta * g
    phases = np.exp(1j * np.outer(energies, t_eta))
    dens = (phases @ weighted).real
    meta = {
        "kind": "ldos",
        "eta": eta,
        "time_step": dt,
        "cutoff": int(k_eta),
        "filter": None if filter_spec is None else vars(filter_spec).copy(),
        "raw_max": float(np.abs(dens).max()) if len(dens) else 0.0,
    }
    if normalize and np.abs(dens).max() > 0:
        dens = dens / np.abs(dens).max()
    return SeriesRecord(grid=energies, values=dens.astype(complex), meta=meta)


def dos(
    ham: QuadraticHamiltonian,
    energies: np.ndarray,
    nu: float,
    n_particles: int | None = None,
    normalize: bool = True,
):
    """Density of states D(E) ~ Tr[P_nu(E) (proj)] via Gaussian trace phases."""
    from .response import SeriesRecord

    energies = np.asarray(energies, dtype=float)
    if nu <= 0:
        raise ValueError("smoothing width nu must be positive")
    lo, hi = (
        ham.spectral_bounds() if n_particles is None else ham.sector_bounds(n_particles)
    )
    radius = max(hi - energies.min(), energies.max() - lo, 1e-9) + 2.0 * nu
    dt = math.pi / (2.0 * radius)
    k_nu = max(1, math.ceil(6.0 / (nu * dt)))
    ks = np.arange(-k_nu, k_nu + 1)
    t_nu = ks * dt
    gauss = (dt / (2.0 * np.pi)) * np.exp(-0.5 * (nu * dt) ** 2 * ks ** 2)
    traces = kernels.projector_trace_series(ham, t_nu, n_particles)
    phases = np.exp(1j * np.outer(energies, t_nu))
    dens = (phases @ (gauss * traces)).real
    meta = {
        "kind": "dos",
        "nu": nu,
        "n_particles": n_particles,
        "time_step": dt,
        "cutoff": int(k_nu),
        "raw_max": float(np.abs(dens).max()) if len(dens) else 0.0,
        "raw_integral": float(np.trapezoid(dens, energies)) if len(dens) > 1 else 0.0,
    }
    if normalize and np.abs(dens).max() > 0:
        dens = dens / np.abs(dens).max()
    return SeriesRecord(grid=energies, values=dens.astype(complex), meta=meta)

"""Filter-ensemble expectation values at fixed filling: exact traces,
Metropolis-Hastings sampling over Fock states, and Boltzmann-weighted
canonical averaging."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .errors import SpectralWeightError
from .filters import (
    FilterSpec,
    filtered_expectation,
    riemann_filter_weights,
    single_filter_expectation,
)
from .gaussian import FockState, MajoranaMonomialSum, QuadraticHamiltonian

# Squaring the Gaussian filter halves the variance: P_s^2 is proportional to
# P_{s/sqrt(2)}, so the ensemble decomposition Tr[A P_delta]/Tr[P_delta]
# = sum_psi p_psi A_psi(s, E) holds with s = sqrt(2)*delta.  (The paper
# prints delta/sqrt(2); see the width test in tests/test_ensemble.py.)
ENSEMBLE_WIDTH_FACTOR = math.sqrt(2.0)


@dataclass(frozen=True)
class SamplerConfig:
    """Metropolis-Hastings chain parameters for the filter-ensemble weights."""

    filter_spec: FilterSpec
    n_particles: int
    length: int
    burn_in: int | None = None
    stride: int | None = None
    seed: int = 0
    n_chains: int = 8
    proposal: str = "single-fermion-move"

    def __post_init__(self):
        if self.burn_in is not None and not self.length > self.burn_in >= 0:
            raise ValueError("need length > burn_in >= 0")
        if self.stride is not None and self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.proposal != "single-fermion-move":
            raise ValueError(f"unknown proposal kind {self.proposal!r}")

    def resolved(self, n_sites: int) -> "SamplerConfig":
        """Fill burn-in (10 N moves) and stride (N moves) defaults."""
        burn = 10 * n_sites if self.burn_in is None else self.burn_in
        stride = n_sites if self.stride is None else self.stride
        if not self.length > burn:
            raise ValueError("chain length must exceed burn-in")
        return replace(self, burn_in=burn, stride=stride)


@dataclass(frozen=True)
class ChainDiagnostics:
    """Per-chain summary: acceptance rate, sampled-energy statistics, and an
    integrated autocorrelation estimate of <psi|H|psi>."""

    acceptance_rate: float
    mean_energy: float
    energy_std: float
    energy_autocorr_time: float
    n_retained: int
    weight_clipped: int = 0

    def __post_init__(self):
        if not 0.0 <= self.acceptance_rate <= 1.0:
            raise ValueError("acceptance rate must lie in [0, 1]")


def state_weight(
    state: FockState, spec: FilterSpec, ham: QuadraticHamiltonian
) -> float:
    """<psi|P_delta(E)|psi> >= 0 via the single filter sum on the echo.

    Discretization noise can drive the value slightly negative; it is then
    clipped to 0 with a warning.
    """
    fw = riemann_filter_weights(spec)
    echo = kernels.loschmidt_series(ham, state, fw.times)
    val = float(np.real(np.sum(fw.weights * echo)))
    if val < 0:
        if val < -1e-6 / math.sqrt(2 * math.pi * spec.width ** 2):
            warnings.warn(
                f"state weight clipped to 0 (was {val:.3e})", stacklevel=2
            )
        return 0.0
    return val


def integrated_autocorr_time(series: np.ndarray, c: float = 5.0) -> float:
    """Self-consistent windowed estimate of tau_int (Sokal's criterion)."""
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n < 8 or np.allclose(x, x[0]):
        return 1.0
    x = x - x.mean()
    acf = np.correlate(x, x, mode="full")[n - 1:]
    if acf[0] <= 0:
        return 1.0
    acf = acf / acf[0]
    tau = 1.0
    for window in range(1, n // 2):
        tau = 1.0 + 2.0 * acf[1:window + 1].sum()
        if window >= c * tau:
            break
    return max(tau, 1.0)


def mh_sample(
    cfg: SamplerConfig,
    ham: QuadraticHamiltonian,
    seed: int | None = None,
) -> tuple[list[FockState], ChainDiagnostics]:
    """One Metropolis-Hastings chain over fixed-filling Fock states.

    Stationary distribution ~ <psi|P_delta(E)|psi>.  The proposal moves one
    uniformly chosen occupied fermion to a uniformly chosen empty site
    (symmetric); a candidate is accepted iff u < min(1, w_new / w_old) with
    u uniform.  Identical seeds reproduce identical chains bit-for-bit.
    """
    n = ham.n_sites
    n0 = cfg.n_particles
    if not 0 < n0 < n:
        raise ValueError("sampling needs 0 < filling < N (no moves otherwise)")
    cfg = cfg.resolved(n)
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    fw = riemann_filter_weights(cfg.filter_spec)

    occupied = list(rng.choice(n, size=n0, replace=False))
    walker = kernels.WeightWalker(
        ham, fw.weights, fw.times, FockState.from_occupied(n, occupied)
    )
    weight = walker.weight()
    retries = 0
    while weight <= 0.0 and retries < 100:
        occupied = list(rng.choice(n, size=n0, replace=False))
        walker = kernels.WeightWalker(
            ham, fw.weights, fw.times, FockState.from_occupied(n, occupied)
        )
        weight = walker.weight()
        retries += 1
    if weight <= 0.0:
        # seed from the diagonal-energy Fock state closest to the target
        diag = np.real(np.diag(ham.h))
        order = _closest_filling_state(diag, n0, cfg.filter_spec.energy - ham.offset)
        walker = kernels.WeightWalker(
            ham, fw.weights, fw.times, FockState.from_occupied(n, order)
        )
        weight = walker.weight()
        occupied = list(order)
        if weight <= 0.0:
            raise SpectralWeightError(
                "could not find a starting state with nonzero filter weight"
            )

    samples: list[FockState] = []
    energies: list[float] = []
    accepted = 0
    clipped = 0
    occ_set = set(occupied)
    for move in range(1, cfg.length + 1):
        row = int(rng.integers(n0))
        old_site = walker.occupied_list[row]
        empties = [s for s in range(n) if s not in occ_set]
        new_site = int(empties[rng.integers(len(empties))])
        w_new, cache = walker.proposal_weight(row, new_site)
        if w_new == 0.0:
            clipped += 1
        ratio = w_new / weight if weight > 0 else 1.0
        if rng.uniform() < min(1.0, ratio):
            occ_set.discard(old_site)
            occ_set.add(new_site)
            walker.accept(row, new_site, cache)
            weight = walker.weight()
            accepted += 1
        if move > cfg.burn_in and (move - cfg.burn_in) % cfg.stride == 0:
            st = walker.state
            samples.append(st)
            energies.append(kernels.fock_energy(st, ham))

    energies_arr = np.asarray(energies)
    diag = ChainDiagnostics(
        acceptance_rate=accepted / cfg.length,
        mean_energy=float(energies_arr.mean()) if len(energies_arr) else math.nan,
        energy_std=float(energies_arr.std()) if len(energies_arr) else math.nan,
        energy_autocorr_time=integrated_autocorr_time(energies_arr),
        n_retained=len(samples),
        weight_clipped=clipped,
    )
    return samples, diag


def _closest_filling_state(diag: np.ndarray, n0: int, energy: float) -> list[int]:
    """Occupied sites whose diagonal energies sum closest to `energy`."""
    order = np.argsort(diag)
    best = list(order[:n0])
    best_err = abs(diag[best].sum() - energy)
    current = list(best)
    # greedy swaps toward the target energy
    for _ in range(len(diag)):
        improved = False
        for i, s in enumerate(list(current)):
            for cand in order:
                if cand in current:
                    continue
                trial = list(current)
                trial[i] = int(cand)
                err = abs(diag[trial].sum() - energy)
                if err < best_err - 1e-12:
                    best_err = err
                    current = trial
                    improved = True
        if not improved:
            break
    return sorted(int(s) for s in current)


def run_chains(
    cfg: SamplerConfig, ham: QuadraticHamiltonian
) -> tuple[list[list[FockState]], list[ChainDiagnostics]]:
    """Independent chains with seeds spawned deterministically from cfg.seed."""
    seeds = np.random.SeedSequence(cfg.seed).generate_state(cfg.n_chains)
    chains = []
    diags = []
    for s in seeds:
        smp, d = mh_sample(cfg, ham, seed=int(s))
        chains.append(smp)
        diags.append(d)
    return chains, diags


def ensemble_expectation_sampled(
    samples: list[FockState],
    observable: MajoranaMonomialSum,
    spec: FilterSpec,
    ham: QuadraticHamiltonian,
    estimator: str = "double",
) -> tuple[float, float]:
    """Sample mean approximating Tr[A P_delta(E)] / Tr[P_delta(E)].

    estimator="double" averages A_psi(sqrt(2)*delta, E) (two-sided filter,
    the Eq.-(6) decomposition); estimator="single" averages the one-sided
    quantity <psi|A P_delta|psi>/<psi|P_delta|psi>, which has the same
    ensemble mean but needs only one time argument.  The standard error is
    autocorrelation-adjusted.
    """
    if not samples:
        raise ValueError("need at least one sample")
    vals = []
    skipped = 0
    for st in samples:
        try:
            if estimator == "double":
                wide = spec.with_width(ENSEMBLE_WIDTH_FACTOR * spec.width)
                vals.append(filtered_expectation(st, observable, wide, ham))
            elif estimator == "single":
                vals.append(
                    single_filter_expectation(st, observable, spec, ham).real
                )
            else:
                raise ValueError(f"unknown estimator {estimator!r}")
        except ArithmeticError:
            skipped += 1
    if skipped:
        warnings.warn(f"skipped {skipped} samples with overlap errors", stacklevel=2)
    if not vals:
        raise SpectralWeightError("all samples hit the overlap floor")
    arr = np.asarray(vals)
    tau = integrated_autocorr_time(arr)
    n_eff = max(len(arr) / tau, 1.0)
    se = float(arr.std(ddof=1) / math.sqrt(n_eff)) if len(arr) > 1 else 0.0
    return float(arr.mean()), se


def pooled_estimate(chain_means: list[float]) -> tuple[float, float]:
    """Pooled mean and standard error across independent chains."""
    arr = np.asarray(chain_means, dtype=float)
    if len(arr) < 2:
        return float(arr.mean()), math.inf
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(len(arr)))


def ensemble_expectation_exact(
    ham: QuadraticHamiltonian,
    spec: FilterSpec,
    observable: MajoranaMonomialSum,
    n_particles: int,
    floor: float = 1e-280,
) -> float:
    """Tr[A P_delta(E) proj] / Tr[P_delta(E) proj] through projected traces."""
    from .filters import projected_trace

    fw = riemann_filter_weights(spec)
    num = 0.0 + 0.0j
    den = 0.0 + 0.0j
    for w, t in zip(fw.weights, fw.times):
        den += w * projected_trace(ham, t, n_particles)
        num += w * projected_trace(ham, t, n_particles, observable)
    if abs(den) < floor:
        raise SpectralWeightError(
            f"no spectral weight at E = {spec.energy} in the n = {n_particles} sector"
        )
    return float((num / den).real)


def canonical_expectation(
    ham: QuadraticHamiltonian,
    observable: MajoranaMonomialSum,
    inv_temperature: float,
    width: float,
    energy_grid: np.ndarray,
    n_particles: int,
) -> float:
    """Boltzmann-weighted filter average over an energy grid.

    Trapezoid quadrature of e^{-beta E} Tr[A P_delta(E) proj] against the
    same with A = 1; the grid must span the sector support with spacing at
    most width/2 and negligible boundary weight.
    """
    energy_grid = np.asarray(energy_grid, dtype=float)
    if len(energy_grid) < 3:
        raise ValueError("energy grid too short")
    spacing = float(np.diff(energy_grid).max())
    if spacing > width / 2 + 1e-12:
        raise ValueError(
            f"energy grid spacing {spacing:.3f} exceeds width/2 = {width / 2:.3f}"
        )
    lo, hi = ham.sector_bounds(n_particles)
    if energy_grid[0] > lo or energy_grid[-1] < hi:
        raise ValueError("energy grid does not span the sector support")

    from .filters import projected_trace

    num = np.empty(len(energy_grid))
    den = np.empty(len(energy_grid))
    for i, e in enumerate(energy_grid):
        spec = FilterSpec.auto(ham, e, width, n_particles=n_particles)
        fw = riemann_filter_weights(spec)
        d = 0.0 + 0.0j
        u = 0.0 + 0.0j
        for w, t in zip(fw.weights, fw.times):
            d += w * projected_trace(ham, t, n_particles)
            u += w * projected_trace(ham, t, n_particles, observable)
        num[i] = u.real
        den[i] = d.real
    boltz = np.exp(-inv_temperature * (energy_grid - energy_grid.min()))
    total_den = np.trapezoid(boltz * den, energy_grid)
    boundary = abs(boltz[0] * den[0]) + abs(boltz[-1] * den[-1])
    if boundary > 1e-6 * abs(total_den) * len(energy_grid):
        warnings.warn("energy grid may be too narrow for the Boltzmann weight",
                      stacklevel=2)
    return float(np.trapezoid(boltz * num, energy_grid) / total_den)

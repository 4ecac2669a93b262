"""Time-domain response quantities (Loschmidt echo, three-time correlators,
filtered current-current commutator/anticommutator traces) and their
frequency-domain transforms: Lambda(omega), conductivity, Drude weight."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import OverlapFloorError
from .filters import FilterSpec, riemann_filter_weights
from .gaussian import (
    FockState,
    MajoranaMonomialSum,
    QuadraticHamiltonian,
    fock_covariance,
    orthogonal_evolution,
    pfaffian,
    pure_state_evolution_trace,
)

GRID_UNIFORM_TOL = 1e-12


@dataclass(frozen=True)
class SeriesRecord:
    """Complex samples on a uniform grid (time in 1/J or frequency in J)."""

    grid: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=complex)
        if grid.ndim != 1 or values.shape != grid.shape:
            raise ValueError("grid and values must be matching 1-d arrays")
        if len(grid) > 1:
            steps = np.diff(grid)
            if steps.min() <= 0:
                raise ValueError("grid must be strictly increasing")
            scale = max(abs(grid[0]), abs(grid[-1]), 1.0)
            if np.abs(steps - steps[0]).max() > GRID_UNIFORM_TOL * scale:
                raise ValueError("grid must be uniform to 1e-12")
        if not np.isfinite(values).all():
            raise ValueError("series values must be finite")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        grid.flags.writeable = False
        values.flags.writeable = False

    @property
    def step(self) -> float:
        return float(self.grid[1] - self.grid[0]) if len(self.grid) > 1 else 0.0

    def real_series(self) -> np.ndarray:
        return self.values.real


@dataclass(frozen=True)
class TransformConfig:
    """Half-line Fourier transform parameters: Gaussian cutoff width sigma,
    integration horizon, and the e^{(sign) i omega t} convention."""

    sigma: float
    t_max: float
    sign: int = -1

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("cutoff width sigma must be positive")
        if self.t_max < 4 * self.sigma:
            raise ValueError("t_max must be at least 4 sigma")
        if self.sign not in (+1, -1):
            raise ValueError("sign convention must be +1 or -1")


@dataclass(frozen=True)
class FixedFilling:
    """Marker requesting the fixed-filling filter ensemble instead of a state."""

    n_particles: int


def loschmidt_echo(
    state: FockState,
    ham: QuadraticHamiltonian,
    times: np.ndarray,
    method: str = "determinant",
) -> SeriesRecord:
    """f_psi(t) = <psi|e^{-iHt}|psi>, magnitude and phase.

    method="determinant" uses the occupied block of the single-particle
    propagator; method="gaussian-trace" evaluates tr[rho_psi e^{-iHt}]
    through covariance Pfaffians.  The two implementations agree to 1e-11.
    """
    times = np.asarray(times, dtype=float)
    if method == "determinant":
        vals = kernels.loschmidt_series(ham, state, times)
    elif method == "gaussian-trace":
        gamma = fock_covariance(state).gamma
        vals = np.array(
            [pure_state_evolution_trace(gamma, ham, t) for t in times]
        )
    else:
        raise ValueError(f"unknown method {method!r}")
    return SeriesRecord(
        grid=times, values=vals, meta={"kind": "loschmidt", "method": method}
    )


def _quartic_wick(c1: np.ndarray, c2: np.ndarray, g: np.ndarray) -> complex:
    """< (xi^T C1 xi)(xi^T C2 xi) > under a Gaussian functional with
    two-point matrix g_pq = <xi_p xi_q>."""
    d1 = np.tensordot(c1, g)
    d2 = np.tensordot(c2, g)
    cross = np.tensordot(c1, g @ c2 @ g.T)
    return complex(d1 * d2 - 2.0 * cross)


def three_time_correlator(
    state: FockState,
    ham: QuadraticHamiltonian,
    a: MajoranaMonomialSum,
    b: MajoranaMonomialSum,
    t1: float,
    t2: float,
    t3: float,
) -> complex:
    """<psi| e^{iHt1} A e^{iHt2} B e^{iHt3} |psi>.

    Evaluated by rewriting in two-state form with the Heisenberg-rotated
    product A * B(t2): the numerator is a quartic Wick sum over the
    two-state contraction matrix, the denominator the Loschmidt echo at
    t1 + t2 + t3.
    """
    n = ham.n_sites
    gamma0 = fock_covariance(state).gamma
    o1 = orthogonal_evolution(ham, t1)
    g1 = o1 @ gamma0 @ o1.T  # psi_1 = e^{-iH t1} psi
    o2 = orthogonal_evolution(ham, -(t2 + t3))
    g2 = o2 @ gamma0 @ o2.T  # psi_2 = e^{+iH(t2+t3)} psi
    tau = t1 + t2 + t3
    f = complex(kernels.loschmidt_series(ham, state, np.array([tau]))[0])
    if abs(f) < 1e-12:
        raise OverlapFloorError(
            f"Loschmidt echo |f({tau})| = {abs(f):.2e}: normalization undefined"
        )
    gsum = g1 + g2
    base = 2.0 ** (-n) * pfaffian(gsum) * pfaffian(g1)
    delta = (-2 * np.eye(2 * n) + 1j * g1 - 1j * g2) @ np.linalg.inv(gsum)
    delta = (delta - delta.T) / 2
    gfun = np.eye(2 * n) + 1j * delta.conj()
    ca = a.coefficient_matrix()
    cb = b.rotated(orthogonal_evolution(ham, t2)).coefficient_matrix()
    a0 = complex(a.constant)
    b0 = complex(b.constant)
    val = (
        0.25 * _quartic_wick(ca, cb, gfun)
        + 0.5 * a0 * np.tensordot(cb, gfun)
        + 0.5 * b0 * np.tensordot(ca, gfun)
        + a0 * b0
    )
    return complex(base * val / f)


def _fermion_matrix(op: MajoranaMonomialSum, name: str) -> np.ndarray:
    if op.fermion_matrix is None:
        raise ValueError(
            f"{name} must be built from a fermion one-body matrix for the "
            "eigenbasis engine (use MajoranaMonomialSum.from_fermion_matrix)"
        )
    return op.fermion_matrix


def _pair_numerators(target, ham, spec, times, a, b, engine):
    fw = riemann_filter_weights(spec)
    if isinstance(target, FixedFilling):
        return kernels.ensemble_series(
            ham,
            fw.weights,
            fw.times,
            target.n_particles,
            _fermion_matrix(a, "a"),
            None if b is a else _fermion_matrix(b, "b"),
            times,
        )
    if engine == "auto":
        engine = "eigenbasis"
    if engine == "eigenbasis":
        return kernels.pure_pair_series(
            ham,
            target,
            fw.weights,
            spec.cutoff,
            spec.time_step,
            _fermion_matrix(a, "a"),
            None if b is a else _fermion_matrix(b, "b"),
            times,
        )
    if engine != "covariance":
        raise ValueError(f"unknown engine {engine!r}")
    # literal assembly: filter weights x three-time correlators
    nk = len(fw.times)
    taus = fw.times[:, None] + fw.times[None, :]
    echos = kernels.loschmidt_series(ham, target, taus.ravel()).reshape(nk, nk)
    norm = complex(fw.weights @ echos @ fw.weights)
    ab = np.zeros(len(times), dtype=complex)
    ba = np.zeros(len(times), dtype=complex)
    lin_a = np.zeros(len(times), dtype=complex)
    lin_b = 0.0 + 0.0j
    ident = MajoranaMonomialSum.identity(ham.n_modes)
    for ki, tk in enumerate(fw.times):
        for kj, tkp in enumerate(fw.times):
            if abs(echos[ki, kj]) < kernels.OVERLAP_SKIP:
                continue
            w = fw.weights[ki] * fw.weights[kj]
            lin_b += w * three_time_correlator(target, ham, ident, b, -tk, 0.0, -tkp)
            for ti, t in enumerate(times):
                ab[ti] += w * three_time_correlator(
                    target, ham, a, b, t - tk, -t, -tkp
                )
                ba[ti] += w * three_time_correlator(
                    target, ham, b, a, -tk, t, -t - tkp
                )
                lin_a[ti] += w * three_time_correlator(
                    target, ham, a, ident, t - tk, -t, -tkp
                )
    return kernels.SeriesNumerators(
        norm=norm, ab=ab, ba=ba, lin_a=lin_a, lin_b=lin_b
    )


def _check_floor(norm: complex, spec: FilterSpec, target, floor: float):
    scale = 1.0 / (2.0 * np.pi * spec.width ** 2)
    if isinstance(target, FixedFilling):
        # trace normalization scales with the sector instead of a pure state
        if abs(norm) <= 0.0:
            raise OverlapFloorError("no spectral weight at this energy")
        return
    if norm.real < floor * scale:
        raise OverlapFloorError(
            f"insufficient overlap with energy window: {norm.real:.3e}"
        )


def filtered_commutator_trace(
    target,
    ham: QuadraticHamiltonian,
    spec: FilterSpec,
    times: np.ndarray,
    a: MajoranaMonomialSum,
    b: MajoranaMonomialSum | None = None,
    engine: str = "auto",
    floor: float = 1e-10,
) -> SeriesRecord:
    """<[A(t), B(0)]> in the filtered state (FockState target) or the
    fixed-filling filter ensemble (FixedFilling target)."""
    b = a if b is None else b
    times = np.asarray(times, dtype=float)
    nums = _pair_numerators(target, ham, spec, times, a, b, engine)
    _check_floor(nums.norm, spec, target, floor)
    vals = (nums.ab - nums.ba) / nums.norm
    return SeriesRecord(
        grid=times,
        values=vals,
        meta={
            "kind": "filtered_commutator",
            "filter": vars(spec).copy(),
            "target": _target_label(target),
            "engine": engine,
        },
    )


def filtered_anticommutator_trace(
    target,
    ham: QuadraticHamiltonian,
    spec: FilterSpec,
    times: np.ndarray,
    a: MajoranaMonomialSum,
    b: MajoranaMonomialSum | None = None,
    engine: str = "auto",
    floor: float = 1e-10,
    subtract_means: bool = True,
) -> SeriesRecord:
    """Omega(t) = <{dA(t), dB(0)}> with dX = X - <X> in the same filtered
    target; for stationary targets the subtraction vanishes identically."""
    b = a if b is None else b
    times = np.asarray(times, dtype=float)
    nums = _pair_numerators(target, ham, spec, times, a, b, engine)
    _check_floor(nums.norm, spec, target, floor)
    vals = (nums.ab + nums.ba) / nums.norm
    if subtract_means:
        mean_a = nums.lin_a / nums.norm
        mean_b = nums.lin_b / nums.norm
        vals = vals - 2.0 * mean_a * mean_b
    return SeriesRecord(
        grid=times,
        values=vals,
        meta={
            "kind": "filtered_anticommutator",
            "filter": vars(spec).copy(),
            "target": _target_label(target),
            "engine": engine,
        },
    )


def _target_label(target) -> str:
    if isinstance(target, FixedFilling):
        return f"ensemble(n={target.n_particles})"
    return f"fock(n={target.n_particles})"


def fourier_half_line(
    series: SeriesRecord,
    cfg: TransformConfig,
    omegas: np.ndarray | None = None,
) -> SeriesRecord:
    """Trapezoid approximation of int_0^inf dt e^{(sign) i w t} e^{-t^2/2s^2} x(t).

    The time grid must be uniform and start at 0; integration stops at
    cfg.t_max (error below the Gaussian cutoff tail).
    """
    grid = series.grid
    if abs(grid[0]) > 1e-12:
        raise ValueError("half-line transform needs a grid starting at t = 0")
    if grid[-1] < cfg.t_max - 1e-9:
        raise ValueError("series does not reach t_max")
    mask = grid <= cfg.t_max + 1e-12
    t = grid[mask]
    x = series.values[mask] * np.exp(-(t ** 2) / (2.0 * cfg.sigma ** 2))
    if omegas is None:
        omega_max = math.pi / series.step
        omegas = np.linspace(-omega_max, omega_max, 2401)
    omegas = np.asarray(omegas, dtype=float)
    out = np.empty(len(omegas), dtype=complex)
    chunk = max(1, int(2e6 // max(len(t), 1)))
    for start in range(0, len(omegas), chunk):
        w = omegas[start:start + chunk]
        phases = np.exp(1j * cfg.sign * np.outer(w, t))
        out[start:start + len(w)] = np.trapezoid(phases * x[None, :], t, axis=1)
    meta = dict(series.meta)
    meta.update(
        {
            "transform": "half-line gaussian-cutoff",
            "sigma": cfg.sigma,
            "t_max": cfg.t_max,
            "sign": cfg.sign,
        }
    )
    return SeriesRecord(grid=omegas, values=out, meta=meta)


def lambda_frequency(
    commutator: SeriesRecord,
    cfg: TransformConfig | None = None,
    omegas: np.ndarray | None = None,
) -> SeriesRecord:
    """Current-current response Lambda(w) = -i int_0^inf e^{-iwt} <[j(t), j(0)]>."""
    if cfg is None:
        cfg = TransformConfig(sigma=2.0, t_max=10.0, sign=-1)
    if cfg.sign != -1:
        raise ValueError("Lambda(omega) uses the e^{-i omega t} convention")
    out = fourier_half_line(commutator, cfg, omegas)
    vals = -1j * out.values
    meta = dict(out.meta)
    meta["kind"] = "lambda"
    return SeriesRecord(grid=out.grid, values=vals, meta=meta)


def conductivity(
    lam: SeriesRecord,
    kinetic_expectation: float,
    omega_min: float = 0.01,
    check_factor: float = 2.0,
    flag_tol: float = 0.05,
) -> tuple[float, SeriesRecord]:
    """Drude weight and regular conductivity from Lambda(omega).

    D = pi e^2 (Re Lambda(omega_min) - <K>) with e = 1, evaluated again at
    check_factor * omega_min; a relative spread above flag_tol marks the
    zero-frequency limit unconverged (recorded in the returned metadata).
    sigma_reg(w) = -e^2 Im Lambda(w) / w with the w = 0 point excluded.
    """
    grid = lam.grid
    pos = grid[grid > 0]
    if len(pos) == 0 or pos.min() > omega_min:
        raise ValueError(
            f"omega grid lacks points at or below omega_min = {omega_min}"
        )
    re_1 = float(np.interp(omega_min, grid, lam.values.real))
    re_2 = float(np.interp(check_factor * omega_min, grid, lam.values.real))
    drude_1 = math.pi * (re_1 - kinetic_expectation)
    drude_2 = math.pi * (re_2 - kinetic_expectation)
    spread = abs(drude_1 - drude_2)
    converged = spread <= flag_tol * max(abs(drude_1), abs(drude_2)) + 1e-9
    keep = np.abs(grid) > 0.5 * abs(grid[1] - grid[0])
    reg_vals = np.zeros_like(lam.values)
    reg_vals[keep] = -lam.values.imag[keep] / grid[keep]
    meta = dict(lam.meta)
    meta.update(
        {
            "kind": "regular_conductivity",
            "drude": drude_1,
            "drude_check": drude_2,
            "omega_min": omega_min,
            "converged": bool(converged),
        }
    )
    regular = SeriesRecord(grid=grid, values=reg_vals, meta=meta)
    return drude_1, regular


def time_average(series: SeriesRecord, horizon: float) -> float:
    """(1/T) int_0^T x(t) dt by the trapezoid rule."""
    grid = series.grid
    if grid[0] > 1e-12 or grid[-1] < horizon - 1e-9:
        raise ValueError("series grid does not cover [0, T]")
    mask = grid <= horizon + 1e-12
    t = grid[mask]
    x = series.values.real[mask]
    if abs(t[-1] - horizon) > 1e-12 and grid[-1] > horizon:
        x_end = float(np.interp(horizon, grid, series.values.real))
        t = np.append(t, horizon)
        x = np.append(x, x_end)
    return float(np.trapezoid(x, t) / horizon)


def moving_average(series: SeriesRecord, window: float) -> SeriesRecord:
    """Centered boxcar average with the window truncated at the edges."""
    if len(series.grid) < 2:
        return series
    dt = series.step
    if window < dt:
        raise ValueError("window must be at least one grid step")
    half = int(round(window / (2.0 * dt)))
    n = len(series.grid)
    csum = np.concatenate([[0.0 + 0.0j], np.cumsum(series.values)])
    lo = np.clip(np.arange(n) - half, 0, n)
    hi = np.clip(np.arange(n) + half + 1, 0, n)
    vals = (csum[hi] - csum[lo]) / (hi - lo)
    meta = dict(series.meta)
    meta["moving_average_window"] = window
    return SeriesRecord(grid=series.grid, values=vals, meta=meta)

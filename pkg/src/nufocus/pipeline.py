"""Self-consistent pipeline and parameter scans.

Per parameter point the four stages run in order, under the quasi-static
decoupling of electron and nuclear time scales:

1. steady-state electron spin over the polarization grid,
2. nuclear flip rates w+-(n) from the spin table and pulse asymmetry,
3. stationary nuclear distribution P(n),
4. observables: mean polarization, precessing-spin amplitude, and the
   amplitude-weighted precession frequency shift.

Propagators are solved once per point on a uniform frequency cache grid
(a fixed number of nodes per PSC interval) and linearly interpolated onto
every consumer grid; the interpolation budget is auditable against exact
per-frequency solves.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import __version__ as _VERSION
from .config import (
    SimulationConfig,
    dump_config,
    precession_frequency,
    pulse_duration_from_bandwidth,
    with_scan_value,
    zeeman_frequency,
)
from .constants import HBAR_EV_S
from .errors import EmptyInputError, NufocusError
from .kinetics import (
    FlipRates,
    NuclearDistribution,
    PolarizationGrid,
    drift_table,
    flip_rates,
    moments,
    rates_from_tables,
    steady_distribution,
)
from .propagator import propagate_batch, trion_columns
from .steady_state import SpinTable, steady_states_batch


# ---------------------------------------------------------------------------
# propagator cache


@dataclass(frozen=True)
class PropagatorCache:
    """Pulse propagators on a uniform precession-frequency grid.

    ``at`` interpolates the matrix entries linearly between nodes; the node
    spacing is a fixed fraction of the PSC interval 2 pi / T_R, which keeps
    the documented interpolation error far below 1e-4 in max norm.
    """

    nodes: np.ndarray           # (C,) rad/s, uniform
    matrices: np.ndarray        # (C,4,4)
    window: float               # pulse window covered by each propagator
    config: SimulationConfig
    interpolate: bool = True

    @classmethod
    def build(
        cls, config: SimulationConfig, omega_lo: float, omega_hi: float,
        interpolate: bool = True,
    ) -> "PropagatorCache":
        dpsc = 2.0 * math.pi / config.dot.T_R
        step = dpsc / config.numerics.cache_points_per_psc
        lo = omega_lo - step
        count = int(math.ceil((omega_hi + step - lo) / step)) + 1
        nodes = lo + step * np.arange(count)
        if interpolate:
            mats = propagate_batch(nodes, config.pulse, config.numerics)
        else:
            mats = np.empty((count, 4, 4), dtype=complex)
        tau = pulse_duration_from_bandwidth(config.pulse.bandwidth_fwhm)
        window = 2.0 * config.numerics.window_tau_mult * tau
        return cls(nodes=nodes, matrices=mats, window=window, config=config,
                   interpolate=interpolate)

    def at(self, omega) -> np.ndarray:
        """Propagators at the requested frequencies.

        Linear interpolation between the cache nodes by default; an
        interpolation-free cache solves every query exactly instead.
        """
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        if not self.interpolate:
            return self.exact(omega)
        if omega.min() < self.nodes[0] or omega.max() > self.nodes[-1]:
            raise ValueError("frequency outside the cached range")
        step = self.nodes[1] - self.nodes[0]
        pos = (omega - self.nodes[0]) / step
        idx = np.clip(pos.astype(int), 0, len(self.nodes) - 2)
        frac = (pos - idx)[:, None, None]
        return (1.0 - frac) * self.matrices[idx] + frac * self.matrices[idx + 1]

    def exact(self, omega) -> np.ndarray:
        """Directly solved propagators, bypassing interpolation (audits)."""
        return propagate_batch(
            np.atleast_1d(np.asarray(omega, dtype=float)),
            self.config.pulse, self.config.numerics,
        )

    def audit(self, n_points: int = 10, seed: int = 0) -> float:
        """Max-norm interpolation error on random in-range frequencies."""
        rng = np.random.default_rng(seed)
        omega = rng.uniform(self.nodes[1], self.nodes[-2], n_points)
        return float(np.abs(self.at(omega) - self.exact(omega)).max())


def alpha_tables(U: np.ndarray) -> np.ndarray:
    """(alpha+, alpha-) per stacked propagator, shape (K,2).

    Dark rows (no trion coupling, e.g. zero pulse area) get the neutral
    weights (1, 1); the optical rate they multiply vanishes there anyway.
    """
    cols = trion_columns(U)
    den = cols.sum(axis=1, keepdims=True)
    dark = den[:, 0] <= 1e-15
    den[dark] = 1.0
    out = 2.0 * cols / den
    out[dark] = 1.0
    return out


# ---------------------------------------------------------------------------
# observables


@dataclass(frozen=True)
class ObservableRow:
    """One scan point of the calculated observables."""

    scan_value: float
    mean_n: float
    freq_shift_ghz: float
    amplitude: float
    distribution_ref: str = ""
    status: str = "ok"


def observables_from_distribution(
    dist: NuclearDistribution,
    spin: SpinTable,
    grid: PolarizationGrid,
    dot,
    bath,
) -> ObservableRow:
    """Distribution-averaged precessing-spin amplitude and frequency shift.

    amplitude = sum_k p_k |s_perp(n_k)| / 2 and the reported frequency is
    the amplitude-weighted mean of w_e(n); when the weights underflow (no
    transverse spin anywhere) the amplitude is zero and the shift falls
    back to <n> A / (2 pi hbar).
    """
    if len(dist) != len(spin) or len(dist) != len(grid):
        from .errors import MisalignedTablesError

        raise MisalignedTablesError("distribution, spin, and grid lengths differ")
    omega0 = zeeman_frequency(dot)
    mean_n, _ = moments(dist)
    s_perp = spin.s_perp
    weights = dist.p * s_perp
    norm = float(weights.sum())
    amplitude = float(norm / 2.0)
    if norm <= 1e-250:
        shift = mean_n * bath.A_hyperfine / HBAR_EV_S / (2.0 * math.pi)
        return ObservableRow(
            scan_value=math.nan, mean_n=mean_n,
            freq_shift_ghz=shift / 1e9, amplitude=0.0,
        )
    mean_omega = float(np.dot(weights, spin.omega) / norm)
    shift = (mean_omega - omega0) / (2.0 * math.pi)
    return ObservableRow(
        scan_value=math.nan, mean_n=mean_n,
        freq_shift_ghz=shift / 1e9, amplitude=amplitude,
    )


# ---------------------------------------------------------------------------
# pipeline


@dataclass(frozen=True)
class FineDriftTable:
    """Continuous-n drift curve sampled densely in precession frequency."""

    n: np.ndarray
    omega: np.ndarray
    w_plus: np.ndarray
    w_minus: np.ndarray
    alpha_plus: np.ndarray
    alpha_minus: np.ndarray
    S_x: np.ndarray
    rho_tt: np.ndarray
    drift: np.ndarray


@dataclass(frozen=True)
class PipelineResult:
    config: SimulationConfig
    grid: PolarizationGrid
    spin: SpinTable
    alphas: np.ndarray
    rates: FlipRates
    distribution: NuclearDistribution
    observables: ObservableRow
    fine_drift: FineDriftTable
    cache: PropagatorCache


def build_cache(
    config: SimulationConfig, interpolate: bool = True
) -> tuple[PropagatorCache, PolarizationGrid]:
    grid = PolarizationGrid.build(
        config.bath, config.dot, config.numerics.omega_min
    )
    omega = precession_frequency(
        grid.values, config.dot, config.bath, config.numerics.omega_min
    )
    cache = PropagatorCache.build(
        config, float(omega[0]), float(omega[-1]), interpolate=interpolate
    )
    return cache, grid


def spin_and_alpha(
    cache: PropagatorCache, omega: np.ndarray, dot
) -> tuple[SpinTable, np.ndarray]:
    U = cache.at(omega)
    s, rho_tt = steady_states_batch(U, omega, dot, cache.window)
    table = SpinTable(omega=omega, s=s, rho_tt=rho_tt)
    return table, alpha_tables(U)


def fine_omega_grid(
    cache: PropagatorCache, config: SimulationConfig
) -> np.ndarray:
    """Frequencies covering the n window at ``drift_points_per_psc``."""
    omega0 = zeeman_frequency(config.dot)
    A_rad = config.bath.A_hyperfine / HBAR_EV_S
    dpsc = 2.0 * math.pi / config.dot.T_R
    step = dpsc / config.numerics.drift_points_per_psc
    lo = max(omega0 - A_rad * config.bath.n_window, cache.nodes[0])
    hi = min(omega0 + A_rad * config.bath.n_window, cache.nodes[-1])
    return np.arange(lo, hi + step / 2.0, step)


def fine_drift_curve(
    cache: PropagatorCache, config: SimulationConfig
) -> FineDriftTable:
    """Drift of the mean polarization sampled densely between PSCs.

    The flip-rate formula is a continuous function of n through w_e(n); the
    master equation lives on the discrete grid, but the drift curve is
    sampled at ``drift_points_per_psc`` per PSC interval so its zero
    crossings are located far more finely than the single-flip step.
    """
    omega0 = zeeman_frequency(config.dot)
    A_rad = config.bath.A_hyperfine / HBAR_EV_S
    omega = fine_omega_grid(cache, config)
    spin, alph = spin_and_alpha(cache, omega, config.dot)
    n = (omega - omega0) / A_rad
    wp, wm = rates_from_tables(
        omega, spin.s[:, 0], spin.rho_tt, alph[:, 0], alph[:, 1],
        config.bath, config.dot,
    )
    return FineDriftTable(
        n=n, omega=omega, w_plus=wp, w_minus=wm,
        alpha_plus=alph[:, 0], alpha_minus=alph[:, 1],
        S_x=spin.s[:, 0] / 2.0, rho_tt=spin.rho_tt,
        drift=wp - wm - n * (wp + wm),
    )


def run_pipeline(
    config: SimulationConfig, cache: PropagatorCache | None = None,
    exact: bool = False,
) -> PipelineResult:
    """Execute the four pipeline stages for one parameter point.

    ``exact=True`` bypasses cache interpolation and solves a propagator at
    every consumed frequency (slower; used by precision audits).
    """
    if cache is None:
        cache, grid = build_cache(config, interpolate=not exact)
    else:
        grid = PolarizationGrid.build(
            config.bath, config.dot, config.numerics.omega_min
        )
    omega = precession_frequency(
        grid.values, config.dot, config.bath, config.numerics.omega_min
    )
    spin, alph = spin_and_alpha(cache, omega, config.dot)
    rates = flip_rates(grid, spin, alph, config.bath, config.dot)
    dist = steady_distribution(grid, rates)
    obs = observables_from_distribution(dist, spin, grid, config.dot, config.bath)
    fine = fine_drift_curve(cache, config)
    return PipelineResult(
        config=config, grid=grid, spin=spin, alphas=alph, rates=rates,
        distribution=dist, observables=obs, fine_drift=fine, cache=cache,
    )


# ---------------------------------------------------------------------------
# scans


def _scan_point(args) -> ObservableRow:
    config, axis, value = args
    point = with_scan_value(config, axis, value) if axis != "none" else config
    try:
        result = run_pipeline(point)
    except NufocusError as exc:
        return ObservableRow(
            scan_value=value, mean_n=math.nan, freq_shift_ghz=math.nan,
            amplitude=math.nan, status=exc.tag,
        )
    return replace(result.observables, scan_value=value)


def scan(
    config: SimulationConfig,
    axis: str | None = None,
    values=None,
    threads: int = 1,
) -> list[ObservableRow]:
    """One pipeline run per scan value; failed points are recorded in-row.

    Rows come back in input order and the computation is deterministic for
    a fixed config regardless of ``threads``.
    """
    axis = config.scan.axis if axis is None else axis
    values = list(config.scan.values if values is None else values)
    if axis == "none" and not values:
        values = [0.0]
    jobs = [(config, axis, v) for v in values]
    if threads <= 1 or len(jobs) <= 1:
        return [_scan_point(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_scan_point, jobs))


# ---------------------------------------------------------------------------
# delimited output and the run manifest

_GHZ = 2.0 * math.pi * 1e9


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_rows(path: str, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_spin_csv(path: str, spin: SpinTable) -> None:
    S = spin.S
    _write_rows(
        path,
        ["omega_over_2pi_GHz", "Sx", "Sy", "Sz", "rho_TT"],
        (
            (spin.omega[k] / _GHZ, S[k, 0], S[k, 1], S[k, 2], spin.rho_tt[k])
            for k in range(len(spin))
        ),
    )


_RATES_HEADER = [
    "n", "w_plus_per_s", "w_minus_per_s", "alpha_plus", "alpha_minus",
    "Sx", "rho_TT", "drift_per_s", "omega_over_2pi_GHz",
]


def write_rates_csv(path: str, rates: FlipRates) -> None:
    drift = drift_table(rates)
    _write_rows(
        path,
        _RATES_HEADER,
        (
            (
                rates.grid.values[k], rates.w_plus[k], rates.w_minus[k],
                rates.alpha_plus[k], rates.alpha_minus[k], rates.S_x[k],
                rates.rho_tt[k], drift[k], rates.omega[k] / _GHZ,
            )
            for k in range(len(rates))
        ),
    )


def write_fine_drift_csv(path: str, fine: FineDriftTable) -> None:
    _write_rows(
        path,
        _RATES_HEADER,
        (
            (
                fine.n[k], fine.w_plus[k], fine.w_minus[k],
                fine.alpha_plus[k], fine.alpha_minus[k], fine.S_x[k],
                fine.rho_tt[k], fine.drift[k], fine.omega[k] / _GHZ,
            )
            for k in range(fine.n.shape[0])
        ),
    )


def write_distribution_csv(
    path: str, dist: NuclearDistribution, omega: np.ndarray
) -> None:
    _write_rows(
        path,
        ["n", "P", "omega_over_2pi_GHz"],
        (
            (dist.grid.values[k], dist.p[k], omega[k] / _GHZ)
            for k in range(len(dist))
        ),
    )


def write_observables_csv(path: str, axis: str, rows: list[ObservableRow]) -> None:
    _write_rows(
        path,
        [f"scan_value_{_AXIS_UNITS.get(axis, 'value')}", "mean_n",
         "freq_shift_GHz", "amplitude", "distribution_ref", "status"],
        (
            (r.scan_value, r.mean_n, r.freq_shift_ghz, r.amplitude,
             r.distribution_ref, r.status)
            for r in rows
        ),
    )


_AXIS_UNITS = {
    "detuning": "eV", "area": "rad", "B_field": "T", "retardance": "rad",
    "none": "value",
}


def config_hash(config: SimulationConfig) -> str:
    return hashlib.sha256(dump_config(config).encode()).hexdigest()


def write_manifest(
    path: str, config: SimulationConfig, files: list[str]
) -> None:
    payload = {
        "version": _VERSION,
        "config_sha256": config_hash(config),
        "T_R_s": config.dot.T_R,
        "zeeman_frequency_GHz": zeeman_frequency(config.dot) / _GHZ,
        "A_hyperfine_eV": config.bath.A_hyperfine,
        "scan_axis": config.scan.axis,
        "files": [os.path.basename(f) for f in files],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def ensure_outdir(directory: str) -> str:
    os.makedirs(directory, exist_ok=True)
    probe = os.path.join(directory, ".write-probe")
    try:
        with open(probe, "w") as fh:
            fh.write("")
        os.remove(probe)
    except OSError as exc:
        raise EmptyInputError(f"output directory not writable: {exc}")
    return directory

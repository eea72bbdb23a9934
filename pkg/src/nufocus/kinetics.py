"""Nuclear spin-flip kinetics: rates, drift, and the polarization distribution.

Per-nucleus flip rates on the polarization grid n = (N_up - N_down)/N:

    w+-(n) = [A / (hbar w_e(n) N)]^2 alpha+-(n) (rho_TT(n)/T_R) (1 +- 2 S_x(n))
             + gamma_d

with S_x the after-pulse steady-state value.  The distribution P(n) obeys a
birth-death master equation with birth rate N_down(n) w+(n) and death rate
N_up(n) w-(n); a single flip moves n by 2/N.  Its first moment reproduces
the mean-polarization drift  dn/dt = w+ - w- - n (w+ + w-)  exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import BathParams, DotParams, NumericsParams, precession_frequency
from .constants import HBAR_EV_S
from .errors import MisalignedTablesError, UnstableStepError, ZeroRateError
from .steady_state import SpinTable


@dataclass(frozen=True)
class PolarizationGrid:
    """Uniform polarization grid with the single-flip step 2/N.

    Grid values are the integer multiples of 2/N inside +-n_window, so the
    grid is symmetric and always contains n = 0.
    """

    N: int
    values: np.ndarray          # (M,)

    @classmethod
    def build(
        cls, bath: BathParams, dot: DotParams | None = None,
        omega_min: float = 0.0,
    ) -> "PolarizationGrid":
        half = int(np.floor(bath.n_window * bath.N_nuclei / 2.0 + 1e-9))
        values = np.arange(-half, half + 1) * (2.0 / bath.N_nuclei)
        if dot is not None:
            precession_frequency(values, dot, bath, omega_min)
        return cls(N=bath.N_nuclei, values=values)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def step(self) -> float:
        return 2.0 / self.N

    @property
    def n_up(self) -> np.ndarray:
        return self.N * (1.0 + self.values) / 2.0

    @property
    def n_down(self) -> np.ndarray:
        return self.N * (1.0 - self.values) / 2.0


@dataclass(frozen=True)
class FlipRates:
    """Per-nucleus up/down flip rates over a polarization grid."""

    grid: PolarizationGrid
    omega: np.ndarray
    w_plus: np.ndarray
    w_minus: np.ndarray
    alpha_plus: np.ndarray
    alpha_minus: np.ndarray
    S_x: np.ndarray
    rho_tt: np.ndarray

    def __len__(self) -> int:
        return len(self.grid)


@dataclass(frozen=True)
class NuclearDistribution:
    """Normalized probability vector over a polarization grid."""

    grid: PolarizationGrid
    p: np.ndarray

    def __len__(self) -> int:
        return len(self.grid)


def rates_from_tables(
    omega: np.ndarray,
    s_x: np.ndarray,
    rho_tt: np.ndarray,
    alpha_plus: np.ndarray,
    alpha_minus: np.ndarray,
    bath: BathParams,
    dot: DotParams,
):
    """Flip-rate formula on arbitrary aligned per-frequency tables.

    ``s_x`` is the Bloch component (so 1 +- 2 S_x = 1 +- s_x); negative
    population factors within rounding are clamped to zero before the
    depolarization floor is added.
    """
    pref = (bath.A_hyperfine / (HBAR_EV_S * omega * bath.N_nuclei)) ** 2
    gamma_opt = rho_tt / dot.T_R
    up = np.clip(1.0 + s_x, 0.0, None)
    down = np.clip(1.0 - s_x, 0.0, None)
    w_plus = pref * alpha_plus * gamma_opt * up + bath.gamma_depol
    w_minus = pref * alpha_minus * gamma_opt * down + bath.gamma_depol
    return w_plus, w_minus


def flip_rates(
    grid: PolarizationGrid,
    spin_table: SpinTable,
    alpha_table: np.ndarray,
    bath: BathParams,
    dot: DotParams,
) -> FlipRates:
    """Assemble per-nucleus flip rates from aligned spin and alpha tables.

    ``alpha_table`` has shape (M, 2) holding (alpha+, alpha-) per grid point.
    """
    alpha_table = np.asarray(alpha_table, dtype=float)
    if len(spin_table) != len(grid) or alpha_table.shape != (len(grid), 2):
        raise MisalignedTablesError(
            f"grid has {len(grid)} points, spin table {len(spin_table)}, "
            f"alpha table {alpha_table.shape}"
        )
    w_plus, w_minus = rates_from_tables(
        spin_table.omega, spin_table.s[:, 0], spin_table.rho_tt,
        alpha_table[:, 0], alpha_table[:, 1], bath, dot,
    )
    return FlipRates(
        grid=grid, omega=np.asarray(spin_table.omega, dtype=float),
        w_plus=w_plus, w_minus=w_minus,
        alpha_plus=alpha_table[:, 0], alpha_minus=alpha_table[:, 1],
        S_x=spin_table.s[:, 0] / 2.0, rho_tt=spin_table.rho_tt,
    )


def mean_drift(n, rates: FlipRates):
    """Mean-polarization drift w+ - w- - n (w+ + w-) at grid points ``n``.

    ``n`` may be a scalar grid value or an index array; values must lie on
    the rates grid.
    """
    n = np.asarray(n, dtype=float)
    idx = np.searchsorted(rates.grid.values, n)
    idx = np.clip(idx, 0, len(rates.grid) - 1)
    if np.any(np.abs(rates.grid.values[idx] - n) > 1e-12):
        raise MisalignedTablesError("drift point is not on the rates grid")
    wp = rates.w_plus[idx]
    wm = rates.w_minus[idx]
    return wp - wm - n * (wp + wm)


def drift_table(rates: FlipRates) -> np.ndarray:
    """Drift evaluated on the whole rates grid."""
    return mean_drift(rates.grid.values, rates)


def steady_distribution(
    grid: PolarizationGrid, rates: FlipRates
) -> NuclearDistribution:
    """Stationary distribution of the birth-death master equation.

    Uses the detailed-balance product formula accumulated in log space:
    log P(n+) - log P(n) = log[N_down(n) w+(n)] - log[(N_up(n)+1) w-(n+)].
    """
    if rates.grid is not grid and not np.array_equal(
        rates.grid.values, grid.values
    ):
        raise MisalignedTablesError("rates were built on a different grid")
    wp, wm = rates.w_plus, rates.w_minus
    if np.min(wp) <= 0.0 or np.min(wm) <= 0.0:
        raise ZeroRateError(
            "stationary solve requires strictly positive rates "
            "(gamma_depol > 0 guarantees this)"
        )
    birth = grid.n_down[:-1] * wp[:-1]
    death = (grid.n_up[:-1] + 1.0) * wm[1:]
    log_p = np.concatenate([[0.0], np.cumsum(np.log(birth) - np.log(death))])
    log_p -= log_p.max()
    p = np.exp(log_p)
    p /= p.sum()
    return NuclearDistribution(grid=grid, p=p)


def generator_residual(dist: NuclearDistribution, rates: FlipRates) -> float:
    """Relative residual of the master-equation generator on a distribution."""
    p = dist.p
    grid = dist.grid
    birth = grid.n_down * rates.w_plus
    death = grid.n_up * rates.w_minus
    out = np.zeros_like(p)
    out -= birth * p
    out -= death * p
    out[:-1] += death[1:] * p[1:]
    out[1:] += birth[:-1] * p[:-1]
    # boundary cells have no flux beyond the window
    out[-1] += birth[-1] * p[-1]
    out[0] += death[0] * p[0]
    scale = float(np.max(birth * p + death * p))
    return float(np.abs(out).max() / scale) if scale > 0 else 0.0


@dataclass(frozen=True)
class DistributionTrajectory:
    """Explicit-step evolution record of P(n)."""

    grid: PolarizationGrid
    times: np.ndarray           # (S+1,)
    probs: np.ndarray           # (S+1, M)

    @property
    def final(self) -> NuclearDistribution:
        return NuclearDistribution(grid=self.grid, p=self.probs[-1])

    def means(self) -> np.ndarray:
        return self.probs @ self.grid.values


def max_stable_step(rates: FlipRates) -> float:
    """Largest dt with dt * max total outflow rate = 0.5."""
    grid = rates.grid
    outflow = grid.n_down * rates.w_plus + grid.n_up * rates.w_minus
    # boundary flips out of the window are suppressed
    outflow_eff = outflow.copy()
    outflow_eff[-1] -= grid.n_down[-1] * rates.w_plus[-1]
    outflow_eff[0] -= grid.n_up[0] * rates.w_minus[0]
    return 0.5 / float(outflow_eff.max())


def evolve_distribution(
    p0: NuclearDistribution, rates: FlipRates, dt: float, steps: int
) -> DistributionTrajectory:
    """Forward-Euler evolution of the master equation in flux form.

    Probability is conserved exactly by construction (each outflow term is
    paired with the matching inflow) and the window boundaries are
    reflective: no flux leaves the grid.
    """
    grid = p0.grid
    if len(rates) != len(grid):
        raise MisalignedTablesError("rates and distribution grids differ")
    birth = grid.n_down * rates.w_plus
    death = grid.n_up * rates.w_minus
    birth = birth.copy()
    death = death.copy()
    birth[-1] = 0.0             # reflective truncation
    death[0] = 0.0
    limit = 0.5 / float((birth + death).max())
    if dt > limit:
        raise UnstableStepError(
            f"dt={dt:.3e} s exceeds the explicit-step stability bound; "
            f"maximum admissible dt is {limit:.3e} s"
        )
    p = p0.p.copy()
    probs = np.empty((steps + 1, len(grid)))
    probs[0] = p
    for k in range(steps):
        up_flux = birth * p      # n -> n + 2/N
        down_flux = death * p    # n -> n - 2/N
        p = p - dt * (up_flux + down_flux)
        p[1:] += dt * up_flux[:-1]
        p[:-1] += dt * down_flux[1:]
        probs[k + 1] = p
    times = dt * np.arange(steps + 1)
    return DistributionTrajectory(grid=grid, times=times, probs=probs)


def moments(dist: NuclearDistribution) -> tuple[float, float]:
    """Mean and variance of the polarization."""
    n = dist.grid.values
    mean = float(np.dot(dist.p, n))
    var = float(np.dot(dist.p, (n - mean) ** 2))
    return mean, var

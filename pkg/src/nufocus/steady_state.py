"""Electron spin steady state under the periodic pulse train.

One repetition period is modeled as pulse -> trion dump -> dark interval:

* the pulse conjugates the embedded electron density matrix by the window
  propagator U and reads back the electron-block Bloch vector plus the
  trion population it generated;
* recombination returns the trion population incoherently, split equally
  between |x+> and |x-> (adds nothing to s, restores the trace);
* over the dark interval T_R - window the transverse components (s_y, s_z)
  precess by omega_e * (T_R - window) and decay by exp(-(T_R - window)/T2);
  s_x is untouched (no longitudinal relaxation).

The pulse window is part of the repetition period, so the free phases
accumulated inside U plus the dark-interval precession total omega_e * T_R
per period and the phase synchronization comb sits exactly at
omega = 2 pi k / T_R.

Bloch convention over (|x+>, |x->): s_x = rho_11 - rho_22,
s_y = -2 Im rho_12, s_z = 2 Re rho_12, and S = s/2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DotParams
from .errors import NonContractiveError
from .propagator import Propagator

_SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class BlochState:
    """Electron Bloch vector s (with S = s/2) and the per-pulse trion yield."""

    s: np.ndarray               # (3,)
    trion_yield: float

    @property
    def S(self) -> np.ndarray:
        return 0.5 * self.s


@dataclass(frozen=True)
class PeriodMap:
    """Affine one-period map s -> M s + b on the after-pulse Bloch vector.

    ``trion_const`` and ``trion_lin`` give the trion yield generated by a
    pulse from the pre-pulse vector: rho_TT = trion_const + trion_lin . s_pre.
    ``dark_rotation`` and ``dark_decay`` describe the dark-interval channel
    used to move between after-pulse and pre-pulse states.
    """

    M: np.ndarray               # (3,3)
    b: np.ndarray               # (3,)
    trion_const: float
    trion_lin: np.ndarray       # (3,)
    dark_angle: float
    dark_decay: float


def _apply_pulse_many(U: np.ndarray, s: np.ndarray):
    """Pulse channel for stacked inputs: U (K,4,4), s (K,3)."""
    K = U.shape[0]
    rho = np.zeros((K, 4, 4), dtype=complex)
    rho[:, 0, 0] = (1.0 + s[:, 0]) / 2.0
    rho[:, 1, 1] = (1.0 - s[:, 0]) / 2.0
    r12 = (s[:, 2] - 1j * s[:, 1]) / 2.0
    rho[:, 0, 1] = r12
    rho[:, 1, 0] = np.conj(r12)
    out = U @ rho @ np.conj(np.swapaxes(U, 1, 2))
    s_after = np.empty((K, 3))
    s_after[:, 0] = (out[:, 0, 0] - out[:, 1, 1]).real
    s_after[:, 1] = -2.0 * out[:, 0, 1].imag
    s_after[:, 2] = 2.0 * out[:, 0, 1].real
    rho_tt = (out[:, 2, 2] + out[:, 3, 3]).real
    return s_after, rho_tt


def apply_pulse(U: Propagator | np.ndarray, s_in) -> tuple[np.ndarray, float]:
    """Send a pre-pulse Bloch vector through one pulse.

    Returns the (unnormalized) after-pulse electron Bloch vector read from
    the electron block and the trion population the pulse generated; the
    incoherent trion dump restores the trace without changing s.
    """
    mat = U.matrix if isinstance(U, Propagator) else np.asarray(U)
    s_after, rho_tt = _apply_pulse_many(
        mat[None], np.asarray(s_in, dtype=float)[None]
    )
    return s_after[0], float(rho_tt[0])


def _dark_channel(omega_e: np.ndarray, dot: DotParams, window: float):
    """Rotation angle and transverse decay over the dark interval."""
    dark = dot.T_R - window
    if dark <= 0:
        raise NonContractiveError(
            f"pulse window {window:.3e} s does not fit in T_R {dot.T_R:.3e} s"
        )
    return omega_e * dark, np.exp(-dark / dot.T2_electron)


def interpulse_channel(omega_e: float, dot: DotParams, window: float = 0.0):
    """Affine map on (s, rho_TT) covering dump, precession, and decoherence.

    Returns a callable (s, rho_TT) -> (s', 0); the dump deposits rho_TT/2
    into each electron population, leaving s unchanged.
    ``window`` is the pulse integration window already covered by the
    propagator; precession and decay act over T_R - window.
    """
    angle, decay = _dark_channel(np.asarray(float(omega_e)), dot, window)
    c, sn = np.cos(angle), np.sin(angle)

    def channel(s, rho_tt=0.0):
        s = np.asarray(s, dtype=float)
        out = np.empty(3)
        out[0] = s[0]
        out[1] = decay * (c * s[1] + sn * s[2])
        out[2] = decay * (-sn * s[1] + c * s[2])
        return out, 0.0

    return channel


def _period_maps_many(U: np.ndarray, omega_e: np.ndarray, dot: DotParams,
                      window: float):
    """Batched affine maps: returns M (K,3,3), b (K,3), trion functionals.

    The pulse channel is fitted on the pre-pulse basis (so the trion
    functional takes a pre-pulse vector); the one-period map is its
    composition with the linear dark-interval rotation/decay.
    """
    K = U.shape[0]
    angle, decay = _dark_channel(omega_e, dot, window)
    c, sn = np.cos(angle), np.sin(angle)

    def dark(s):
        out = np.empty_like(s)
        out[:, 0] = s[:, 0]
        out[:, 1] = decay * (c * s[:, 1] + sn * s[:, 2])
        out[:, 2] = decay * (-sn * s[:, 1] + c * s[:, 2])
        return out

    zero = np.zeros((K, 3))
    b, trion_const = _apply_pulse_many(U, zero)
    A = np.empty((K, 3, 3))
    trion_lin = np.empty((K, 3))
    for i in range(3):
        e = np.zeros((K, 3))
        e[:, i] = 1.0
        col, tr = _apply_pulse_many(U, e)
        A[:, :, i] = col - b
        trion_lin[:, i] = tr - trion_const
    R = np.zeros((K, 3, 3))
    R[:, 0, 0] = 1.0
    R[:, 1, 1] = decay * c
    R[:, 1, 2] = decay * sn
    R[:, 2, 1] = -decay * sn
    R[:, 2, 2] = decay * c
    M = A @ R
    return M, b, trion_const, trion_lin, dark, angle, decay


def build_period_map(
    U: Propagator | np.ndarray, omega_e: float, dot: DotParams,
    window: float = 0.0,
) -> PeriodMap:
    """Affine map over one period, after-pulse state to after-pulse state."""
    mat = U.matrix if isinstance(U, Propagator) else np.asarray(U)
    M, b, tc, tl, _, angle, decay = _period_maps_many(
        mat[None], np.asarray([float(omega_e)]), dot, window
    )
    return PeriodMap(
        M=M[0], b=b[0], trion_const=float(tc[0]), trion_lin=tl[0],
        dark_angle=float(angle[0]), dark_decay=float(decay),
    )


def _solve_fixed_points(M: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve (I - M)s = b row-wise with a minimum-norm fallback.

    When the map is not a strict contraction but the system stays
    consistent (a conserved direction with no drive, e.g. zero pulse area),
    the minimum-norm fixed point is returned; an inconsistent singular
    system raises ``NonContractiveError``.
    """
    K = M.shape[0]
    A = np.eye(3) - M
    s = np.empty((K, 3))
    with np.errstate(all="ignore"):
        det = np.linalg.det(A)
        ok = np.abs(det) > _SINGULAR_TOL
        if np.any(ok):
            s[ok] = np.linalg.solve(A[ok], b[ok, :, None])[:, :, 0]
        good = ok.copy()
        if np.any(ok):
            resid = np.abs(A[ok] @ s[ok, :, None] - b[ok, :, None]).max(axis=(1, 2))
            good[ok] = (resid < 1e-8) & np.isfinite(s[ok]).all(axis=1)
    for k in np.nonzero(~good)[0]:
        # near-singular: a conserved direction; rcond collapses it so the
        # minimum-norm fixed point comes back (zero drive along it)
        sol, _, _, _ = np.linalg.lstsq(A[k], b[k], rcond=1e-9)
        resid = float(np.linalg.norm(A[k] @ sol - b[k]))
        if resid > 1e-10:
            raise NonContractiveError(
                "period map has no bounded steady state (infinite T2 with "
                "a driven non-contracting direction)"
            )
        s[k] = sol
    return s


def steady_states_batch(
    U: np.ndarray, omega_e: np.ndarray, dot: DotParams, window: float
):
    """Steady after-pulse Bloch vectors and trion yields for stacked inputs.

    Returns (s (K,3), rho_TT (K,)); the trion yield is evaluated at the
    pre-pulse steady state.
    """
    M, b, tc, tl, dark, _, _ = _period_maps_many(U, omega_e, dot, window)
    s = _solve_fixed_points(M, b)
    s_pre = dark(s)
    rho_tt = tc + np.einsum("ki,ki->k", tl, s_pre)
    return s, rho_tt


def steady_state(
    U: Propagator | np.ndarray, omega_e: float, dot: DotParams,
    window: float | None = None,
) -> BlochState:
    """Steady state reached under the pulse train, reported just after a pulse."""
    mat = U.matrix if isinstance(U, Propagator) else np.asarray(U)
    if window is None:
        window = U.window if isinstance(U, Propagator) else 0.0
    s, rho_tt = steady_states_batch(
        mat[None], np.asarray([float(omega_e)]), dot, window
    )
    return BlochState(s=s[0], trion_yield=float(rho_tt[0]))


@dataclass(frozen=True)
class SpinTable:
    """Steady-state spin against precession frequency."""

    omega: np.ndarray           # (K,) rad/s
    s: np.ndarray               # (K,3) after-pulse Bloch vectors
    rho_tt: np.ndarray          # (K,) per-pulse trion yield

    def __len__(self) -> int:
        return self.omega.shape[0]

    @property
    def S(self) -> np.ndarray:
        return 0.5 * self.s

    @property
    def s_perp(self) -> np.ndarray:
        """Transverse (precessing) Bloch magnitude sqrt(s_y^2 + s_z^2)."""
        return np.hypot(self.s[:, 1], self.s[:, 2])


def spin_vs_frequency(
    propagators: np.ndarray, omega_grid: np.ndarray, dot: DotParams,
    window: float,
) -> SpinTable:
    """Steady states across a strictly increasing frequency grid."""
    omega_grid = np.asarray(omega_grid, dtype=float)
    if omega_grid.ndim != 1 or np.any(np.diff(omega_grid) <= 0):
        raise ValueError("omega grid must be one-dimensional and strictly increasing")
    s, rho_tt = steady_states_batch(propagators, omega_grid, dot, window)
    return SpinTable(omega=omega_grid, s=s, rho_tt=rho_tt)

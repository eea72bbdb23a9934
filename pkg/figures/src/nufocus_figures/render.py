"""Render simulator CSV tables into static figures.

Panels mirror the calculated views of the simulation: steady-state spin
against precession frequency, flip rates, the mean-polarization drift
curve, the stationary nuclear distribution, and observables against the
scanned detuning.  Phase-synchronization frequencies (multiples of the
pulse repetition rate) are drawn as vertical guides wherever the panel has
a frequency axis or a polarization axis with a frequency column alongside.

This package reads only the documented CSV/manifest contract; it does not
import the simulator.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

PANEL_KINDS = (
    "spin_vs_freq",
    "rates_vs_freq",
    "drift",
    "distribution",
    "observables_vs_detuning",
)

DEFAULT_T_REP_S = 12.3e-9

GUIDE_STYLE = dict(color="0.75", lw=0.8, ls=":", zorder=0)


class RenderError(Exception):
    pass


class EmptyInputError(RenderError):
    pass


class MissingColumnError(RenderError):
    pass


@dataclass(frozen=True)
class FigureSpec:
    """One figure request: input table, panel kind, output path."""

    csv_path: str
    kind: str
    out_path: str
    t_rep_s: float = DEFAULT_T_REP_S

    def __post_init__(self):
        if self.kind not in PANEL_KINDS:
            raise RenderError(f"unknown panel kind {self.kind!r}")


@dataclass(frozen=True)
class Table:
    path: str
    columns: dict[str, list]


def load_table(path: str) -> Table:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyInputError(f"{path}: no header row")
        rows = [row for row in reader if row]
    if not rows:
        raise EmptyInputError(f"{path}: no data rows")
    cols = {name: [] for name in header}
    for row in rows:
        for name, value in zip(header, row):
            try:
                cols[name].append(float(value))
            except ValueError:
                cols[name].append(value)
    return Table(path=path, columns=cols)


def column(table: Table, name: str) -> list:
    if name not in table.columns:
        raise MissingColumnError(f"{table.path}: missing column {name!r}")
    return table.columns[name]


def _psc_guides_freq(ax, f_lo, f_hi, t_rep_s):
    """Vertical guides at multiples of the repetition rate, in GHz."""
    f_rep = 1.0 / t_rep_s / 1e9
    k = math.ceil(f_lo / f_rep)
    while k * f_rep <= f_hi:
        ax.axvline(k * f_rep, **GUIDE_STYLE)
        k += 1


def _psc_guides_from_omega(ax, x, omega_ghz, t_rep_s):
    """Guides on an arbitrary x axis using the per-row frequency column."""
    f_rep = 1.0 / t_rep_s / 1e9
    pairs = sorted(zip(omega_ghz, x))
    k = math.ceil(pairs[0][0] / f_rep)
    i = 0
    while k * f_rep <= pairs[-1][0]:
        target = k * f_rep
        while i + 1 < len(pairs) and pairs[i + 1][0] < target:
            i += 1
        (f0, x0), (f1, x1) = pairs[i], pairs[min(i + 1, len(pairs) - 1)]
        if f1 > f0:
            ax.axvline(x0 + (x1 - x0) * (target - f0) / (f1 - f0),
                       **GUIDE_STYLE)
        k += 1


def _build_spin(table: Table, t_rep_s: float):
    f = column(table, "omega_over_2pi_GHz")
    fig, axes = plt.subplots(2, 1, sharex=True, figsize=(6.0, 4.5))
    axes[0].plot(f, column(table, "Sz"), lw=1.2, label="$S_z$")
    axes[0].plot(f, column(table, "Sx"), lw=1.2, label="$S_x$")
    axes[0].set_ylabel("spin component")
    axes[0].legend(loc="best", fontsize=9)
    axes[1].plot(f, column(table, "rho_TT"), lw=1.2, color="C3")
    axes[1].set_ylabel(r"$\rho_{TT}$")
    axes[1].set_xlabel("precession frequency (GHz)")
    for ax in axes:
        _psc_guides_freq(ax, min(f), max(f), t_rep_s)
    return fig


def _build_rates(table: Table, t_rep_s: float):
    f = column(table, "omega_over_2pi_GHz")
    fig, ax = plt.subplots(figsize=(6.0, 3.4))
    ax.plot(f, column(table, "w_plus_per_s"), lw=1.2, label="$w_+$")
    ax.plot(f, column(table, "w_minus_per_s"), lw=1.2, label="$w_-$")
    ax.set_xlabel("precession frequency (GHz)")
    ax.set_ylabel("flip rate (1/s)")
    ax.legend(loc="best", fontsize=9)
    _psc_guides_freq(ax, min(f), max(f), t_rep_s)
    return fig


def _build_drift(table: Table, t_rep_s: float):
    n = column(table, "n")
    fig, ax = plt.subplots(figsize=(6.0, 3.4))
    ax.plot(n, column(table, "drift_per_s"), lw=1.0)
    ax.axhline(0.0, color="0.4", lw=0.8)
    ax.set_xlabel("mean polarization")
    ax.set_ylabel("d<n>/dt (1/s)")
    _psc_guides_from_omega(
        ax, n, column(table, "omega_over_2pi_GHz"), t_rep_s
    )
    return fig


def _build_distribution(table: Table, t_rep_s: float):
    n = column(table, "n")
    fig, ax = plt.subplots(figsize=(6.0, 3.4))
    ax.plot(n, column(table, "P"), lw=1.0)
    ax.set_xlabel("nuclear polarization")
    ax.set_ylabel("P(n)")
    _psc_guides_from_omega(
        ax, n, column(table, "omega_over_2pi_GHz"), t_rep_s
    )
    return fig


def _build_observables(table: Table, t_rep_s: float):
    axis_col = next(
        (name for name in table.columns if name.startswith("scan_value")),
        None,
    )
    if axis_col is None:
        raise MissingColumnError(f"{table.path}: missing column 'scan_value_*'")
    x = column(table, axis_col)
    unit = axis_col.replace("scan_value_", "")
    if unit == "eV":
        x = [v * 1e3 for v in x]
        unit = "meV"
    shift = column(table, "freq_shift_GHz")
    amp = column(table, "amplitude")
    fig, axes = plt.subplots(2, 1, sharex=True, figsize=(6.0, 4.5))
    style = dict(marker="o", ms=3.5, lw=1.0)
    axes[0].plot(x, amp, **style)
    axes[0].set_ylabel("precessing amplitude")
    axes[1].plot(x, shift, color="C3", **style)
    axes[1].axhline(0.0, color="0.4", lw=0.8)
    axes[1].set_ylabel("frequency shift (GHz)")
    axes[1].set_xlabel(f"scan value ({unit})")
    return fig


_BUILDERS = {
    "spin_vs_freq": _build_spin,
    "rates_vs_freq": _build_rates,
    "drift": _build_drift,
    "distribution": _build_distribution,
    "observables_vs_detuning": _build_observables,
}


def build_figure(spec: FigureSpec):
    """Matplotlib figure for a spec; callers own closing it."""
    table = load_table(spec.csv_path)
    return _BUILDERS[spec.kind](table, spec.t_rep_s)


def render(spec: FigureSpec) -> list[str]:
    """Render one spec to PNG and SVG; returns the written paths."""
    fig = build_figure(spec)
    fig.tight_layout()
    written = []
    for ext in ("png", "svg"):
        path = f"{spec.out_path}.{ext}"
        fig.savefig(path, dpi=150)
        written.append(path)
    plt.close(fig)
    return written


def infer_kind(csv_path: str) -> str | None:
    """Panel kind from the table's column set."""
    try:
        table = load_table(csv_path)
    except RenderError:
        raise
    names = set(table.columns)
    if {"Sx", "Sz", "rho_TT", "omega_over_2pi_GHz"} <= names and "n" not in names:
        return "spin_vs_freq"
    if {"n", "w_plus_per_s", "w_minus_per_s"} <= names:
        return "rates_vs_freq"
    if {"n", "P"} <= names:
        return "distribution"
    if any(name.startswith("scan_value") for name in names):
        return "observables_vs_detuning"
    return None

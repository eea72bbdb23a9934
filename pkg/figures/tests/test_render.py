import json
import os
import shutil

import pytest

from nufocus_figures import (
    EmptyInputError,
    FigureSpec,
    MissingColumnError,
    build_figure,
    infer_kind,
    load_table,
    render,
)
from nufocus_figures.cli import main

DATA = os.path.join(os.path.dirname(__file__), "data")
SAMPLES = ("spin.csv", "rates.csv", "drift_fine.csv", "distribution.csv",
           "observables.csv")


def sample(name):
    return os.path.join(DATA, name)


def guide_count(fig):
    """Vertical guide lines drawn across full axis height."""
    count = 0
    for ax in fig.axes:
        for line in ax.get_lines():
            x = line.get_xdata()
            y = line.get_ydata()
            if len(x) == 2 and x[0] == x[1] and tuple(y) == (0, 1):
                count += 1
    return count


class TestGoldenSamples:
    def test_criterion_14_all_samples_render_nonempty(self, tmp_path):
        # renders every checked-in sample CSV through the manifest path
        code = main([sample("manifest.json"), sample("observables.csv"),
                     "--out", str(tmp_path)])
        assert code == 0
        stems = [name[:-4] for name in SAMPLES]
        for stem in stems:
            for ext in ("png", "svg"):
                path = tmp_path / f"{stem}.{ext}"
                assert path.exists(), path
                assert path.stat().st_size > 1000
        # PSC guides present in the distribution panel
        fig = build_figure(FigureSpec(
            csv_path=sample("distribution.csv"), kind="distribution",
            out_path="unused", t_rep_s=12.3e-9,
        ))
        assert guide_count(fig) >= 3
        print("criterion 14: PASS  all sample CSVs rendered to nonempty "
              "PNG+SVG; distribution panel carries PSC guides")

    def test_inputs_untouched(self, tmp_path):
        before = {name: open(sample(name), "rb").read() for name in SAMPLES}
        main([sample("manifest.json"), "--out", str(tmp_path)])
        for name, blob in before.items():
            assert open(sample(name), "rb").read() == blob

    def test_guides_align_with_distribution_peaks(self):
        # sample data comes from a positive-detuning run: the comb peaks
        # sit on the synchronization frequencies
        table = load_table(sample("distribution.csv"))
        fig = build_figure(FigureSpec(
            csv_path=sample("distribution.csv"), kind="distribution",
            out_path="unused", t_rep_s=12.3e-9,
        ))
        guides = sorted(
            line.get_xdata()[0]
            for ax in fig.axes for line in ax.get_lines()
            if len(line.get_xdata()) == 2
            and line.get_xdata()[0] == line.get_xdata()[1]
        )
        n = table.columns["n"]
        p = table.columns["P"]
        peak = n[p.index(max(p))]
        assert min(abs(g - peak) for g in guides) < 2e-4


class TestPanelKinds:
    def test_inference(self):
        assert infer_kind(sample("spin.csv")) == "spin_vs_freq"
        assert infer_kind(sample("rates.csv")) == "rates_vs_freq"
        assert infer_kind(sample("distribution.csv")) == "distribution"
        assert infer_kind(sample("observables.csv")) == "observables_vs_detuning"

    def test_each_panel_kind_builds(self):
        for name, kind in (
            ("spin.csv", "spin_vs_freq"),
            ("rates.csv", "rates_vs_freq"),
            ("drift_fine.csv", "drift"),
            ("distribution.csv", "distribution"),
            ("observables.csv", "observables_vs_detuning"),
        ):
            fig = build_figure(FigureSpec(
                csv_path=sample(name), kind=kind, out_path="unused",
            ))
            assert fig.axes

    def test_unknown_kind_rejected(self):
        with pytest.raises(Exception, match="panel kind"):
            FigureSpec(csv_path="x.csv", kind="pie", out_path="out")


class TestErrors:
    def test_empty_csv(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("n,P,omega_over_2pi_GHz\n")
        with pytest.raises(EmptyInputError):
            load_table(str(path))
        assert main([str(path), "--out", str(tmp_path)]) == 1

    def test_missing_column_named(self, tmp_path):
        path = tmp_path / "odd.csv"
        path.write_text("n,Q\n0.0,1.0\n")
        with pytest.raises(MissingColumnError, match="'P'"):
            build_figure(FigureSpec(
                csv_path=str(path), kind="distribution", out_path="x",
            ))

    def test_single_row_observables(self, tmp_path):
        path = tmp_path / "one.csv"
        path.write_text(
            "scan_value_eV,mean_n,freq_shift_GHz,amplitude,"
            "distribution_ref,status\n0.0004,-0.03,-0.8,0.2,,ok\n"
        )
        out = render(FigureSpec(
            csv_path=str(path), kind="observables_vs_detuning",
            out_path=str(tmp_path / "one"),
        ))
        assert all(os.path.getsize(p) > 0 for p in out)


class TestCli:
    def test_explicit_panel_and_trep(self, tmp_path):
        code = main([sample("drift_fine.csv"), "--out", str(tmp_path),
                     "--panel", "drift", "--t-rep", "12.3e-9"])
        assert code == 0
        assert (tmp_path / "drift_fine.png").exists()
        assert (tmp_path / "drift_fine.svg").exists()

    def test_no_renderable_inputs(self, tmp_path, capsys):
        path = tmp_path / "junk.csv"
        path.write_text("a,b\n1,2\n")
        assert main([str(path), "--out", str(tmp_path)]) == 1
        assert "no renderable" in capsys.readouterr().err

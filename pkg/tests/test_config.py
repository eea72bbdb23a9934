import math

import numpy as np
import pytest

from nufocus import (
    BathParams,
    ConfigError,
    DotParams,
    NonpositiveFrequencyError,
    default_config,
    dump_config,
    load_config,
    precession_frequency,
    pulse_duration_from_bandwidth,
    zeeman_frequency,
)
from nufocus.config import parse_quantity, parse_scan_values
from nufocus.constants import HBAR_EV_S


def write(tmp_path, text):
    path = tmp_path / "run.cfg"
    path.write_text(text)
    return str(path)


class TestParseQuantity:
    def test_si_prefixes(self):
        assert parse_quantity("0.7meV", "energy") == pytest.approx(0.7e-3)
        assert parse_quantity("12.3ns", "time") == pytest.approx(12.3e-9)
        assert parse_quantity("2T", "field") == pytest.approx(2.0)
        assert parse_quantity("0.02Hz", "rate") == pytest.approx(0.02)
        assert parse_quantity("1GHz", "rate") == pytest.approx(1e9)
        assert parse_quantity("100ueV", "energy") == pytest.approx(100e-6)

    def test_pi_and_deg(self):
        assert parse_quantity("0.3pi", "angle") == pytest.approx(0.3 * math.pi)
        assert parse_quantity("90deg", "angle") == pytest.approx(math.pi / 2)

    def test_bare_number(self):
        assert parse_quantity("2e4", "dimensionless") == pytest.approx(2e4)

    def test_wrong_dimension(self):
        with pytest.raises(ConfigError):
            parse_quantity("3ns", "energy", "pulse.detuning")

    def test_garbage(self):
        with pytest.raises(ConfigError):
            parse_quantity("fast", "time")


class TestLoadConfig:
    def test_minimal_file_fills_paper_defaults(self, tmp_path):
        cfg = load_config(write(tmp_path, """
[dot]
B_field = 2T
[pulse]
area = 1pi
detuning = 0.4meV
"""))
        assert cfg.dot.T_R == pytest.approx(12.3e-9)
        assert cfg.dot.T2_electron == pytest.approx(100e-9)
        assert cfg.bath.A_hyperfine == pytest.approx(100e-6)
        assert cfg.bath.N_nuclei == 20000
        assert cfg.bath.gamma_depol == pytest.approx(2e-2)
        assert cfg.pulse.area == pytest.approx(math.pi)
        assert cfg.pulse.detuning == pytest.approx(0.4e-3)

    def test_negative_field_names_key(self, tmp_path):
        with pytest.raises(ConfigError, match="dot.B_field"):
            load_config(write(tmp_path, "[dot]\nB_field = -1T\n"))

    def test_empty_scan_block_means_single_point(self, tmp_path):
        cfg = load_config(write(tmp_path, "[scan]\n"))
        assert cfg.scan.axis == "none"
        assert cfg.scan.values == ()

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="not found"):
            load_config("/no/such/file.cfg")

    def test_unparseable(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot parse"):
            load_config(write(tmp_path, "B_field = 2T\n"))  # key before section

    def test_unknown_key_named(self, tmp_path):
        with pytest.raises(ConfigError, match="dot.colour"):
            load_config(write(tmp_path, "[dot]\ncolour = blue\n"))

    def test_set_override(self, tmp_path):
        path = write(tmp_path, "[dot]\nB_field = 2T\n")
        cfg = load_config(path, overrides=("dot.B_field=3T",))
        assert cfg.dot.B_field == pytest.approx(3.0)

    def test_bad_override_rejected(self, tmp_path):
        path = write(tmp_path, "[dot]\nB_field = 2T\n")
        with pytest.raises(ConfigError, match="dot.B_field"):
            load_config(path, overrides=("dot.B_field=-1T",))

    def test_scan_range(self, tmp_path):
        cfg = load_config(write(tmp_path, """
[scan]
axis = detuning
values = -1.5meV:1.5meV:0.1meV
"""))
        assert len(cfg.scan.values) == 31
        assert cfg.scan.values[0] == pytest.approx(-1.5e-3)
        assert cfg.scan.values[-1] == pytest.approx(1.5e-3)

    def test_scan_axis_validated(self, tmp_path):
        with pytest.raises(ConfigError, match="scan.axis"):
            load_config(write(tmp_path, "[scan]\naxis = colour\nvalues = 1\n"))

    def test_roundtrip(self, tmp_path):
        cfg = load_config(write(tmp_path, """
[dot]
B_field = 1.7T
g_factor = 0.41
[pulse]
detuning = -0.25meV
retardance = 0.25pi
[bath]
N_nuclei = 2000
n_window = 0.07
[scan]
axis = area
values = 0.1pi, 0.3pi:0.5pi:0.1pi
"""))
        path2 = tmp_path / "echo.cfg"
        path2.write_text(dump_config(cfg))
        cfg2 = load_config(str(path2))
        assert cfg2 == cfg


class TestScanValues:
    def test_comma_list(self):
        vals = parse_scan_values("1T, 1.5T, 2T", "B_field")
        assert vals == pytest.approx((1.0, 1.5, 2.0))

    def test_inclusive_endpoints(self):
        vals = parse_scan_values("0:1:0.25", "retardance")
        assert vals == pytest.approx((0.0, 0.25, 0.5, 0.75, 1.0))

    def test_bad_range(self):
        with pytest.raises(ConfigError):
            parse_scan_values("0:1", "area")


class TestDerivedQuantities:
    def test_pulse_duration_at_paper_bandwidth(self):
        tau = pulse_duration_from_bandwidth(0.7e-3)
        assert tau == pytest.approx(1.0552e-12, rel=1e-3)
        # temporal intensity FWHM of sech^2 is 2 arcsech(1/sqrt2) tau ~ 2 ps
        fwhm = 2.0 * math.acosh(math.sqrt(2.0)) * tau
        assert 1.7e-12 < fwhm < 2.1e-12

    def test_bandwidth_duration_product_constant(self):
        rng = np.random.default_rng(7)
        products = [
            pulse_duration_from_bandwidth(b) * b
            for b in rng.uniform(1e-5, 1e-1, 20)
        ]
        assert np.ptp(products) < 1e-25
        assert pulse_duration_from_bandwidth(1.4e-3) == pytest.approx(
            pulse_duration_from_bandwidth(0.7e-3) / 2.0
        )

    def test_duration_vanishes_at_large_bandwidth(self):
        assert pulse_duration_from_bandwidth(1e6) < 1e-21

    def test_spectral_fwhm_numerically(self):
        # quadrature of the field Fourier transform, bisected to half power
        bw = 0.7e-3
        tau = pulse_duration_from_bandwidth(bw)
        t = np.linspace(-60 * tau, 60 * tau, 40001)
        field = 1.0 / np.cosh(t / tau)

        def intensity(omega):
            return np.trapezoid(field * np.cos(omega * t), t) ** 2

        peak = intensity(0.0)
        lo, hi = 0.0, 20.0 / tau
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if intensity(mid) > 0.5 * peak:
                lo = mid
            else:
                hi = mid
        fwhm_ev = 2.0 * 0.5 * (lo + hi) * HBAR_EV_S
        assert fwhm_ev == pytest.approx(bw, rel=1e-6)

    def test_zeeman_12ghz_at_2t(self):
        dot = DotParams(g_factor=0.43, B_field=2.0)
        assert zeeman_frequency(dot) / (2 * math.pi) == pytest.approx(
            12.0e9, rel=5e-3
        )

    def test_zeeman_linear(self):
        rng = np.random.default_rng(3)
        assert zeeman_frequency(DotParams(B_field=0.0)) == 0.0
        base = DotParams(g_factor=0.43, B_field=2.0)
        assert zeeman_frequency(DotParams(g_factor=0.43, B_field=3.0)) == (
            pytest.approx(1.5 * zeeman_frequency(base))
        )
        for _ in range(5):
            g, b, scale = rng.uniform(0.1, 3.0, 3)
            assert zeeman_frequency(
                DotParams(g_factor=g * scale, B_field=b)
            ) == pytest.approx(scale * zeeman_frequency(
                DotParams(g_factor=g, B_field=b)
            ))

    def test_precession_frequency(self):
        dot, bath = DotParams(), BathParams()
        w0 = zeeman_frequency(dot)
        assert precession_frequency(0.0, dot, bath) == pytest.approx(w0)
        # one GHz of shift corresponds to a few percent polarization
        shift = 2 * math.pi * 1.0e9
        n = shift * HBAR_EV_S / bath.A_hyperfine
        assert 0.03 < n < 0.05
        assert precession_frequency(n, dot, bath) == pytest.approx(w0 + shift)

    def test_precession_mirror_symmetry(self):
        dot, bath = DotParams(), BathParams()
        w0 = zeeman_frequency(dot)
        rng = np.random.default_rng(11)
        for n in rng.uniform(0, 0.2, 10):
            total = (precession_frequency(n, dot, bath)
                     + precession_frequency(-n, dot, bath))
            assert total == pytest.approx(2 * w0, rel=1e-14)

    def test_equivalent_nuclear_field(self):
        # 1 GHz frequency change <-> an effective field near 170 mT
        dot = DotParams(g_factor=0.43)
        from nufocus.constants import HBAR_J_S, MU_B_J_T

        b_eq = HBAR_J_S * 2 * math.pi * 1e9 / (dot.g_factor * MU_B_J_T)
        assert b_eq == pytest.approx(0.17, rel=0.03)

    def test_guard_on_wide_window(self):
        dot = DotParams(B_field=0.2)   # 1.2 GHz Zeeman
        bath = BathParams(n_window=0.3)
        with pytest.raises(NonpositiveFrequencyError):
            precession_frequency(-0.3, dot, bath)

    def test_default_config_valid(self):
        default_config().validate()

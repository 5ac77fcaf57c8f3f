import math

import numpy as np
import pytest

from subres.poly import GradedSpace, PolyMap, max_coeff_delta, recenter
from subres.serialize import (
    ParseError,
    load_spectrum,
    orbit_hash,
    orbit_text,
    parse_system,
    save_spectrum,
    system_text,
)
from subres.spectral import EpsilonBudget, Spectrum
from subres.systems import (
    RunDefaults,
    SkewProductSystem,
    SystemValidationError,
    TrigCoeff,
    make_periodic,
    make_stationary,
    power_family,
    sample_skew_orbit,
)

TWO_BAND = Spectrum(((-2.1, -2.1), (-1.0, -1.0)))
S11 = GradedSpace((1, 1))

STAT_F = PolyMap(
    S11,
    S11,
    2,
    {(0, (1, 0)): 0.12, (0, (0, 2)): 0.3, (1, (0, 1)): 0.35, (1, (1, 1)): 0.5},
)


def quad_skew(rho=0.25, amp=0.03):
    return SkewProductSystem(
        spec=TWO_BAND,
        space=S11,
        base_kind="rotation",
        rho=rho,
        rho_nl=0.12,
        diag=((-2.1, amp, 0.0, 1), (-1.0, amp, 0.25, 1)),
        coeffs=((0, (0, 2), TrigCoeff(0.1, 0.03, 0.1, 1)),),
        run=RunDefaults(N=4, length=40, seed=7, theta0=0.2, v0=(0.05, -0.12)),
        alpha=(math.sqrt(5) - 1) / 2,
    )


class TestMakeStationary:
    def test_resonant_example_valid(self):
        orbit = make_stationary(TWO_BAND, S11, STAT_F, length=5)
        assert orbit.period == 1
        assert orbit.margins.band_lo > 0 and orbit.margins.band_hi > 0

    def test_linear_block_diagonal_valid(self):
        f = PolyMap.from_linear(S11, S11, np.diag([0.12, 0.35]))
        make_stationary(TWO_BAND, S11, f)

    def test_flag_mixing_rejected(self):
        f = PolyMap.from_linear(S11, S11, [[0.12, 0.0], [0.2, 0.35]])
        with pytest.raises(SystemValidationError, match="mixes blocks"):
            make_stationary(TWO_BAND, S11, f)

    def test_band_violation_names_block(self):
        f = PolyMap.from_linear(S11, S11, np.diag([0.5, 0.35]))
        with pytest.raises(SystemValidationError, match="block 1"):
            make_stationary(TWO_BAND, S11, f)

    def test_constant_rejected(self):
        f = PolyMap.from_linear(S11, S11, np.diag([0.12, 0.35]), constant=[0.1, 0.0])
        with pytest.raises(SystemValidationError, match="origin"):
            make_stationary(TWO_BAND, S11, f)

    def test_cross_term_allowed_and_reported(self):
        f = PolyMap.from_linear(S11, S11, [[0.12, 0.05], [0.0, 0.35]])
        orbit = make_stationary(TWO_BAND, S11, f)
        assert orbit.margins.cross_max == pytest.approx(0.05)


class TestMakePeriodic:
    def test_period_one_matches_stationary(self):
        orbit = make_periodic(TWO_BAND, S11, [STAT_F])
        assert orbit.period == 1

    def test_period_two(self):
        g = PolyMap(
            S11, S11, 2, {(0, (1, 0)): 0.13, (1, (0, 1)): 0.36, (0, (0, 2)): -0.2}
        )
        orbit = make_periodic(TWO_BAND, S11, [STAT_F, g])
        assert orbit.period == 2
        assert orbit.germ(5) is orbit.germs[1]


class TestEpsilonSlack:
    def test_outside_raw_band_inside_widened_band(self):
        # singular value 0.01 outside the raw band in log scale, eps 0.02
        sigma = math.exp(-2.1 - 0.01)
        f = PolyMap.from_linear(S11, S11, np.diag([sigma, math.exp(-1.0)]))
        orbit = make_stationary(
            TWO_BAND, S11, f, eps=EpsilonBudget(0.02, 2)
        )
        assert orbit.margins.band_lo == pytest.approx(0.01, abs=1e-9)

    def test_outside_widened_band_rejected(self):
        sigma = math.exp(-2.1 - 0.05)
        f = PolyMap.from_linear(S11, S11, np.diag([sigma, math.exp(-1.0)]))
        with pytest.raises(SystemValidationError, match="block 1"):
            make_stationary(TWO_BAND, S11, f, eps=EpsilonBudget(0.02, 2))


class TestSkewSampling:
    def test_linear_fiber_constant_germ(self):
        sys = SkewProductSystem(
            spec=TWO_BAND,
            space=S11,
            base_kind="doubling",
            rho=0.3,
            rho_nl=0.0,
            diag=((-2.1, 0.0, 0.0, 1), (-1.0, 0.0, 0.0, 1)),
            coeffs=(),
            run=RunDefaults(2, 10, 0, 0.1, (0.05, 0.05)),
        )
        orbit = sample_skew_orbit(sys, 0.1, (0.05, 0.05), 10, 2)
        for k in range(10):
            assert max_coeff_delta(orbit.germ(k), orbit.germ(0)) == 0.0

    def test_fixed_point_reduces_to_stationary(self):
        sys = quad_skew(amp=0.0)
        orbit = sample_skew_orbit(sys, 0.2, (0.0, 0.0), 5, 4)
        fiber = sys.fiber_map_at(0.2)
        # at the fixed point 0 the germ is the fiber map itself
        assert max_coeff_delta(orbit.germ(0), fiber.with_max_degree(4)) <= 1e-15

    def test_quadratic_germ_hand_expansion(self):
        sys = quad_skew()
        theta = 0.37
        fiber = sys.fiber_map_at(theta)
        a = fiber.coeffs[(0, (1, 0))]
        b = fiber.coeffs[(1, (0, 1))]
        p = fiber.coeffs[(0, (0, 2))]
        u, w = 0.06, -0.1
        germ = recenter(fiber, [u, w])
        expect = PolyMap(
            S11,
            S11,
            2,
            {(0, (1, 0)): a, (0, (0, 1)): 2 * p * w, (0, (0, 2)): p, (1, (0, 1)): b},
        )
        assert max_coeff_delta(germ, expect) <= 1e-15

    def test_escape_rejected(self):
        sys = quad_skew(rho=0.05)
        with pytest.raises(SystemValidationError, match="escapes"):
            sample_skew_orbit(sys, 0.2, (0.08, 0.03), 10, 2)

    def test_reexpansion_consistency(self):
        sys = quad_skew()
        fiber = sys.fiber_map_at(0.41)
        v = np.array([0.03, -0.08])
        delta = np.array([0.02, 0.05])
        germ_v = recenter(fiber, v)
        germ_v2 = recenter(fiber, v + delta)
        shifted = recenter(germ_v, delta)
        assert max_coeff_delta(shifted, germ_v2) <= 1e-10

    def test_orbit_metadata(self):
        sys = quad_skew()
        orbit = sample_skew_orbit(sys, 0.2, (0.05, -0.12), 12, 4)
        assert len(orbit.fiber_points) == 13
        assert len(orbit.base_points) == 13
        assert orbit.domain_radius > 0.1

    def test_injectivity_margin(self):
        assert quad_skew().injectivity_margin(n_theta=8, n_grid=3) > 0.1

    def test_determinism(self):
        sys = quad_skew()
        o1 = sample_skew_orbit(sys, 0.2, (0.05, -0.12), 15, 4)
        o2 = sample_skew_orbit(sys, 0.2, (0.05, -0.12), 15, 4)
        assert orbit_text(o1) == orbit_text(o2)
        assert orbit_hash(o1) == orbit_hash(o2)


class TestPowerFamily:
    def test_square_composes_germs(self):
        orbit = make_stationary(TWO_BAND, S11, STAT_F, length=4)
        fam = power_family(orbit, 2)
        assert fam.shift == 2
        from subres.poly import compose_truncated

        expect = compose_truncated(STAT_F.with_max_degree(4), STAT_F, 4)
        assert max_coeff_delta(fam.maps[0], expect) == 0.0


class TestSerialization:
    def test_spectrum_roundtrip(self, tmp_path):
        path = tmp_path / "bands.spec"
        save_spectrum(TWO_BAND, path)
        again = load_spectrum(path)
        assert again == TWO_BAND
        save_spectrum(again, tmp_path / "bands2.spec")
        assert (tmp_path / "bands.spec").read_bytes() == (
            tmp_path / "bands2.spec"
        ).read_bytes()

    def test_spectrum_exact_decimal_roundtrip(self, tmp_path):
        spec = Spectrum(((-2.1000000000000001, -2.1), (-1.0000000000000002, -1.0)))
        path = tmp_path / "x.spec"
        save_spectrum(spec, path)
        assert load_spectrum(path) == spec

    def test_stationary_roundtrip(self):
        orbit = make_stationary(TWO_BAND, S11, STAT_F, length=5)
        text = system_text(orbit)
        again = parse_system(text)
        assert system_text(again) == text
        assert orbit_text(again) == orbit_text(orbit)

    def test_skew_roundtrip(self):
        sys = quad_skew()
        text = system_text(sys)
        again = parse_system(text)
        assert system_text(again) == text
        o1 = sample_skew_orbit(sys, 0.2, (0.05, -0.12), 10, 4)
        o2 = sample_skew_orbit(again, 0.2, (0.05, -0.12), 10, 4)
        assert orbit_hash(o1) == orbit_hash(o2)

    def test_nonnegative_spectrum_rejected_with_message(self):
        text = "[meta]\nkind stationary\n[spectrum]\nband -1.0 0.5\n"
        with pytest.raises(ParseError, match="negative"):
            parse_system(text)

    def test_parse_error_carries_line(self):
        text = "[meta]\nkind stationary\n[spectrum]\nband -2.1 oops\n"
        with pytest.raises(ParseError, match="line 4"):
            parse_system(text)

    def test_polymap_standalone_roundtrip(self):
        from subres.serialize import parse_polymap, polymap_text

        text = polymap_text(STAT_F)
        again = parse_polymap(text)
        assert polymap_text(again) == text
        assert max_coeff_delta(again, STAT_F) == 0.0

"""Forward model: direct arrivals, scattered response, phaseless data, CSV."""

import cmath
import math

import numpy as np
import pytest

from ikmig.errors import DataFormatError, SingularityError
from ikmig.forward import (
    FieldVector,
    IntensityData,
    array_response,
    array_response_band,
    direct_arrivals,
    direct_arrivals_band,
    intensity_data,
    linearization_residual,
    read_field_csv,
    read_intensity_csv,
    read_illumination_csv,
    total_field_band,
    write_field_csv,
    write_intensity_csv,
    write_illumination_csv,
)
from ikmig.scene import FrequencyGrid, ImageWindowSpec, PointScatterer, Scene, preset_scene
from ikmig.specfun import green0

# Largest |p|/|g0| over the preset bands, frozen from this module.
RESIDUAL_POINT = 0.11531241853097331
RESIDUAL_BREAKDOWN = {
    "breakdown_a": 3861.152159261932,
    "breakdown_b": 3510.0991357855773,
    "breakdown_c": 35810.059881250956,
    "breakdown_d": 0.061400468822458351,
}


def random_scene(rng, dimension, n_receivers=4, n_scatterers=3):
    recv = rng.uniform(-1.0, 1.0, size=(n_receivers, 2))
    recv[:, 0] -= 4.0
    source = np.array([-5.0, rng.uniform(-1.0, 1.0)])
    scats = tuple(
        PointScatterer((rng.uniform(3.0, 5.0), rng.uniform(-1.0, 1.0)),
                       rng.uniform(0.1, 2.0))
        for _ in range(n_scatterers)
    )
    return Scene(
        dimension=dimension,
        c0=343.0,
        receivers=recv,
        source=source,
        band=FrequencyGrid(200.0, 400.0, 3),
        scatterers=scats,
        window=ImageWindowSpec((4.0, 0.0), 0.2, 10),
    )


def brute_response(scene, omega):
    # Scalar single-scattering sum; green0 is tested independently.
    k = omega / scene.c0
    out = []
    for r in scene.receivers:
        acc = 0j
        for s in scene.scatterers:
            acc += (
                k * k * s.rho
                * green0(tuple(r), s.position, k, scene.dimension)
                * green0(s.position, tuple(scene.source), k, scene.dimension)
            )
        out.append(acc)
    return np.asarray(out)


class TestDirectArrivals:
    def test_d3_closed_form(self):
        sc = random_scene(np.random.default_rng(0), 3)
        omega = float(sc.band.omegas[1])
        k = omega / sc.c0
        got = direct_arrivals(sc, omega)
        assert got.role == "g0"
        for r, value in zip(sc.receivers, got.values):
            dist = np.linalg.norm(r - sc.source)
            assert value == pytest.approx(cmath.exp(1j * k * dist) / (4 * math.pi * dist),
                                          rel=1e-14)

    def test_d2_matches_green0(self):
        sc = random_scene(np.random.default_rng(1), 2)
        omega = float(sc.band.omegas[0])
        k = omega / sc.c0
        got = direct_arrivals(sc, omega).values
        want = [green0(tuple(r), tuple(sc.source), k, 2) for r in sc.receivers]
        assert np.allclose(got, want, rtol=1e-14, atol=0.0)

    def test_band_stack(self):
        sc = random_scene(np.random.default_rng(2), 3)
        stack = direct_arrivals_band(sc)
        assert stack.shape == (3, 4)
        for i, w in enumerate(sc.band.omegas):
            assert np.array_equal(stack[i], direct_arrivals(sc, w).values)

    def test_omega_domain(self):
        sc = random_scene(np.random.default_rng(3), 3)
        with pytest.raises(ValueError):
            direct_arrivals(sc, 0.0)
        with pytest.raises(ValueError):
            direct_arrivals(sc, -1.0)


class TestArrayResponse:
    @pytest.mark.parametrize("dimension", [2, 3])
    @pytest.mark.parametrize("seed", [10, 11, 12])
    def test_matches_brute_force(self, dimension, seed):
        sc = random_scene(np.random.default_rng(seed), dimension)
        for omega in sc.band.omegas:
            got = array_response(sc, float(omega)).values
            want = brute_response(sc, float(omega))
            assert np.max(np.abs(got - want)) <= 1e-13 * np.max(np.abs(want))

    def test_no_scatterers_is_zero(self):
        sc = random_scene(np.random.default_rng(4), 3, n_scatterers=0)
        got = array_response(sc, 1000.0)
        assert got.role == "p"
        assert np.array_equal(got.values, np.zeros(4))

    def test_superposition_in_scatterers(self):
        rng = np.random.default_rng(5)
        sc = random_scene(rng, 3, n_scatterers=2)
        omega = 900.0
        both = array_response(sc, omega).values
        from dataclasses import replace
        first = array_response(replace(sc, scatterers=sc.scatterers[:1]), omega).values
        second = array_response(replace(sc, scatterers=sc.scatterers[1:]), omega).values
        assert np.allclose(both, first + second, rtol=1e-14)

    def test_scatterer_on_receiver(self):
        sc = random_scene(np.random.default_rng(6), 3)
        from dataclasses import replace
        bad = replace(sc, scatterers=(PointScatterer(tuple(sc.receivers[2]), 1.0),))
        with pytest.raises(SingularityError, match="scatterer 0 coincides with receiver 2"):
            array_response(bad, 1000.0)

    def test_scatterer_on_source(self):
        sc = random_scene(np.random.default_rng(7), 3)
        from dataclasses import replace
        bad = replace(sc, scatterers=(PointScatterer(tuple(sc.source), 1.0),))
        with pytest.raises(SingularityError, match="coincides with the source"):
            array_response(bad, 1000.0)

    def test_total_field_band(self):
        sc = random_scene(np.random.default_rng(8), 3)
        total = total_field_band(sc)
        assert np.array_equal(total, direct_arrivals_band(sc) + array_response_band(sc))


class TestFieldVector:
    def test_validation(self):
        with pytest.raises(ValueError):
            FieldVector(np.zeros((2, 2)), "p")
        with pytest.raises(ValueError):
            FieldVector(np.array([1.0, math.nan]), "p")
        with pytest.raises(ValueError):
            FieldVector(np.array([1.0, 2.0]), "weird")
        with pytest.raises(ValueError):
            FieldVector(np.array([1.0, 0.0]), "g0")
        assert len(FieldVector(np.array([1.0, 2.0]), "p")) == 2

    def test_values_read_only(self):
        fv = FieldVector(np.array([1.0, 2.0]), "p")
        with pytest.raises(ValueError):
            fv.values[0] = 0.0


class TestIntensity:
    def test_exact_power_rows(self):
        sc = random_scene(np.random.default_rng(20), 3)
        data = intensity_data(sc)
        total = total_field_band(sc)
        assert np.allclose(data.values, np.abs(total) ** 2, rtol=1e-14)
        assert np.all(data.values >= 0.0)
        assert np.array_equal(data.illumination, np.ones(3))
        assert np.array_equal(data.omegas, sc.band.omegas)
        assert data.n_receivers == 4

    def test_illumination_scaling(self):
        sc = random_scene(np.random.default_rng(21), 2)
        fhat_sq = np.array([2.0, 0.5, 3.0])
        scaled = intensity_data(sc, fhat_sq)
        plain = intensity_data(sc)
        assert np.allclose(scaled.values, fhat_sq[:, None] * plain.values, rtol=1e-15)
        assert np.array_equal(scaled.illumination, fhat_sq)

    def test_fhat_validation(self):
        sc = random_scene(np.random.default_rng(22), 3)
        with pytest.raises(DataFormatError):
            intensity_data(sc, np.ones(2))
        with pytest.raises(DataFormatError):
            intensity_data(sc, np.array([1.0, 0.0, 1.0]))

    def test_container_validation(self):
        om = np.array([1.0, 2.0])
        vals = np.ones((2, 3))
        with pytest.raises(DataFormatError):
            IntensityData(om, np.ones((3, 2)), np.ones(2))
        with pytest.raises(DataFormatError):
            IntensityData(om, vals, np.ones(3))
        with pytest.raises(DataFormatError):
            IntensityData(om, vals * math.nan, np.ones(2))


class TestLinearization:
    def test_point_baseline_pinned(self):
        sc = preset_scene("point")
        worst = max(linearization_residual(sc, w) for w in sc.band.omegas)
        assert worst == pytest.approx(RESIDUAL_POINT, rel=1e-9)

    @pytest.mark.parametrize("case, expected", sorted(RESIDUAL_BREAKDOWN.items()))
    def test_breakdown_pins(self, case, expected):
        sc = preset_scene(case)
        worst = max(linearization_residual(sc, w) for w in sc.band.omegas)
        assert worst == pytest.approx(expected, rel=1e-9)

    def test_residual_linear_in_rho(self):
        from dataclasses import replace
        sc = preset_scene("point")
        weak = replace(sc, scatterers=(PointScatterer(sc.scatterers[0].position, 1e-19),))
        omega = float(sc.band.omegas[50])
        ratio = linearization_residual(weak, omega) / linearization_residual(sc, omega)
        assert ratio == pytest.approx(1e-4, rel=1e-12)


class TestIntensityCsv:
    def make_data(self, seed=30):
        sc = random_scene(np.random.default_rng(seed), 3)
        fhat_sq = np.array([1.5, 2.5, 0.75])
        return intensity_data(sc, fhat_sq)

    def test_round_trip_bit_exact(self, tmp_path):
        data = self.make_data()
        ipath = tmp_path / "intensity.csv"
        lpath = tmp_path / "illumination.csv"
        write_intensity_csv(data, ipath)
        write_illumination_csv(data, lpath)
        back = read_intensity_csv(ipath, lpath)
        assert np.array_equal(back.omegas, data.omegas)
        assert np.array_equal(back.values, data.values)
        assert np.array_equal(back.illumination, data.illumination)

    def test_read_without_illumination_defaults_to_one(self, tmp_path):
        data = self.make_data()
        ipath = tmp_path / "intensity.csv"
        write_intensity_csv(data, ipath)
        back = read_intensity_csv(ipath)
        assert np.array_equal(back.illumination, np.ones(3))

    def test_header_layout(self, tmp_path):
        data = self.make_data()
        ipath = tmp_path / "intensity.csv"
        write_intensity_csv(data, ipath)
        lines = ipath.read_text().splitlines()
        assert lines[0] == "freq_index,omega_rad_s,receiver_index,value"
        assert len(lines) == 1 + 3 * 4
        assert lines[1].startswith("0,")

    def test_bad_header(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("a,b,c,d\n0,1.0,0,2.0\n")
        with pytest.raises(DataFormatError, match="header"):
            read_intensity_csv(path)

    def test_malformed_row(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("freq_index,omega_rad_s,receiver_index,value\n0,1.0,0\n")
        with pytest.raises(DataFormatError, match="malformed"):
            read_intensity_csv(path)

    def test_out_of_order_rows(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text(
            "freq_index,omega_rad_s,receiver_index,value\n"
            "0,1.0,1,2.0\n0,1.0,0,3.0\n"
        )
        with pytest.raises(DataFormatError, match="out of order"):
            read_intensity_csv(path)

    def test_incomplete_grid(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text(
            "freq_index,omega_rad_s,receiver_index,value\n"
            "0,1.0,0,2.0\n0,1.0,1,3.0\n1,2.0,0,4.0\n"
        )
        with pytest.raises(DataFormatError, match="grid"):
            read_intensity_csv(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("freq_index,omega_rad_s,receiver_index,value\n")
        with pytest.raises(DataFormatError, match="no rows"):
            read_intensity_csv(path)

    def test_illumination_omega_mismatch(self, tmp_path):
        data = self.make_data()
        ipath = tmp_path / "intensity.csv"
        lpath = tmp_path / "illumination.csv"
        write_intensity_csv(data, ipath)
        lines = ["freq_index,omega_rad_s,twopi_Fhat"]
        for i, w in enumerate(data.omegas):
            lines.append(f"{i},{format(w + 1.0, '.17g')},1.0")
        lpath.write_text("\n".join(lines) + "\n")
        with pytest.raises(DataFormatError, match="omega mismatch"):
            read_intensity_csv(ipath, lpath)

    def test_illumination_missing_rows(self, tmp_path):
        data = self.make_data()
        lpath = tmp_path / "illumination.csv"
        lines = ["freq_index,omega_rad_s,twopi_Fhat",
                 f"0,{format(data.omegas[0], '.17g')},1.0"]
        lpath.write_text("\n".join(lines) + "\n")
        with pytest.raises(DataFormatError, match="misses"):
            read_illumination_csv(lpath, data.omegas)

    def test_illumination_row_outside_grid(self, tmp_path):
        data = self.make_data()
        lpath = tmp_path / "illumination.csv"
        lines = ["freq_index,omega_rad_s,twopi_Fhat", "7,1.0,1.0"]
        lpath.write_text("\n".join(lines) + "\n")
        with pytest.raises(DataFormatError, match="outside"):
            read_illumination_csv(lpath, data.omegas)


class TestFieldCsv:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(40)
        omegas = np.array([10.0, 20.0, 30.0])
        values = rng.normal(size=(3, 5)) + 1j * rng.normal(size=(3, 5))
        path = tmp_path / "field.csv"
        write_field_csv(omegas, values, path)
        om_back, val_back = read_field_csv(path)
        assert np.array_equal(om_back, omegas)
        assert np.array_equal(val_back, values)

    def test_header(self, tmp_path):
        path = tmp_path / "field.csv"
        write_field_csv(np.array([1.0]), np.array([[1 + 2j]]), path)
        lines = path.read_text().splitlines()
        assert lines[0] == "freq_index,omega_rad_s,receiver_index,re,im"
        assert lines[1] == "0,1,0,1,2"

    def test_errors(self, tmp_path):
        path = tmp_path / "field.csv"
        path.write_text("bad\n")
        with pytest.raises(DataFormatError, match="header"):
            read_field_csv(path)
        path.write_text("freq_index,omega_rad_s,receiver_index,re,im\n")
        with pytest.raises(DataFormatError, match="no rows"):
            read_field_csv(path)
        path.write_text("freq_index,omega_rad_s,receiver_index,re,im\n0,1.0,0,1.0\n")
        with pytest.raises(DataFormatError, match="malformed"):
            read_field_csv(path)
        path.write_text(
            "freq_index,omega_rad_s,receiver_index,re,im\n"
            "0,1.0,1,1.0,0.0\n0,1.0,0,1.0,0.0\n"
        )
        with pytest.raises(DataFormatError, match="out of order"):
            read_field_csv(path)

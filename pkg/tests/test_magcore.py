import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dwsynapse.magcore import (MU0, ConfigError, DeviceGeometry, GridGeometry,
                               MagnetizationGrid, MaterialParams, current_density_from_cgs,
                               current_density_to_cgs, gamma_gyro, gauss_from_field,
                               geometry_from_dict, geometry_to_dict, load_material_config,
                               material_from_dict, material_to_dict, normalize,
                               oersted_field_from_gauss)

finite = st.floats(-1e6, 1e6, allow_nan=False)


def test_field_conversion():
    assert oersted_field_from_gauss(10.0) == pytest.approx(795.7747154594767, rel=1e-15)
    assert oersted_field_from_gauss(4 * math.pi) == pytest.approx(1000.0, rel=1e-15)


def test_current_density_conversion():
    assert current_density_from_cgs(3.5e6) == pytest.approx(3.5e10, rel=1e-15)


@given(st.floats(-1e9, 1e9, allow_nan=False))
def test_unit_round_trips(x):
    assert gauss_from_field(oersted_field_from_gauss(x)) == pytest.approx(x, rel=1e-12, abs=1e-300)
    assert current_density_to_cgs(current_density_from_cgs(x)) == pytest.approx(x, rel=1e-12,
                                                                                abs=1e-300)


def test_gyromagnetic_ratio():
    assert gamma_gyro() == pytest.approx(2.2102e5, rel=1e-4)


@given(st.tuples(finite, finite, finite).filter(lambda v: np.linalg.norm(v) > 1e-3))
def test_normalize_unit(v):
    assert np.linalg.norm(normalize(v)) == pytest.approx(1.0, abs=1e-15)


def test_normalize_zero():
    with pytest.raises(ValueError):
        normalize([0, 0, 0])


def test_material_defaults():
    m = MaterialParams()
    assert m.K_eff == pytest.approx(6e5 - 0.5 * MU0 * 8e5 ** 2)
    assert m.wall_delta == pytest.approx(math.sqrt(3e-11 / 6e5))
    assert m.wall_delta_eff > m.wall_delta


@pytest.mark.parametrize("kw", [dict(Ms=-1.0), dict(A_ex=0.0), dict(alpha=-0.1), dict(P=1.5),
                                dict(t_FL=float("nan"))])
def test_material_rejects_bad_values(kw):
    with pytest.raises(ConfigError):
        MaterialParams(**kw)


def test_material_rejects_in_plane_film():
    with pytest.raises(ConfigError, match="K_eff"):
        MaterialParams(Ku=3e5)


def test_table_grid():
    g = DeviceGeometry().grid()
    assert (g.nx, g.ny) == (100, 50)
    assert g.width == pytest.approx(100e-9)
    assert g.cell_volume == pytest.approx(4e-27)


def test_grid_multi_layer_rejected():
    with pytest.raises(ConfigError):
        GridGeometry.from_dimensions(10e-9, 10e-9, 2e-9)


def test_mtj_region_centred():
    x0, x1, y0, y1 = DeviceGeometry().mtj_region()
    assert (x0 + x1) / 2 == pytest.approx(100e-9)
    assert x1 - x0 == pytest.approx(120e-9)
    assert (y0, y1) == pytest.approx((0.0, 100e-9))


def test_magnetization_normalized():
    geo = GridGeometry(3, 2, 1e-9, 1e-9, 1e-9)
    g = MagnetizationGrid(geo, np.arange(18, dtype=float).reshape(3, 2, 3) + 1)
    assert g.max_norm_drift() < 1e-15


def test_magnetization_rejects_zero_and_shape():
    geo = GridGeometry(2, 2, 1e-9, 1e-9, 1e-9)
    with pytest.raises(ValueError):
        MagnetizationGrid(geo, np.zeros((2, 2, 3)))
    with pytest.raises(ValueError):
        MagnetizationGrid(geo, np.ones((3, 2, 3)))


def test_uniform_and_mean():
    geo = GridGeometry(2, 3, 1e-9, 1e-9, 1e-9)
    g = MagnetizationGrid.uniform(geo, (0, 0, 5))
    np.testing.assert_array_equal(g.mean(), [0, 0, 1])


def test_config_round_trip(tmp_path):
    mat = MaterialParams(alpha=0.05)
    geo = DeviceGeometry(magnetic_field_G=20.0)
    assert material_from_dict(material_to_dict(mat)) == mat
    assert geometry_from_dict(geometry_to_dict(geo)) == geo
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"material": material_to_dict(mat),
                             "geometry": geometry_to_dict(geo)}))
    assert load_material_config(p) == (mat, geo)


def test_config_unknown_keys(tmp_path):
    with pytest.raises(ConfigError):
        material_from_dict({"damping": 0.1})
    with pytest.raises(ConfigError):
        geometry_from_dict({"grid_size_m": [1e-9, 1e-9]})
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"materials": {}}))
    with pytest.raises(ConfigError):
        load_material_config(p)


@settings(max_examples=25)
@given(st.floats(1e4, 2e6), st.floats(1e-12, 1e-10))
def test_material_validation_matches_k_eff(ms, a):
    ku = 6e5
    if ku - 0.5 * MU0 * ms ** 2 <= 0:
        with pytest.raises(ConfigError):
            MaterialParams(Ms=ms, A_ex=a, Ku=ku)
    else:
        assert MaterialParams(Ms=ms, A_ex=a, Ku=ku).K_eff > 0

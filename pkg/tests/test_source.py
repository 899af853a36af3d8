import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qvcz.source import (ConfigError, PhysicalConfig, covariance_kernel, default_config,
                         derive_params, load_config, nu_from_z, sample_thermal_field,
                         sample_unpolarized, save_config, source_grid, thermal_line_batch,
                         z_from_nu)


def make(**kw):
    base = dict(wavelength=780e-9, grating_width=3e-3, pixel_size=1e-5, coherence_area=3.6e-11,
                alpha_mag=10.0, detector_separation=2e-3, propagation_distance=64.10)
    base.update(kw)
    return PhysicalConfig(**base)


def test_derive_params_reference_plane():
    p = derive_params(make(propagation_distance=64.10))
    assert p.nu == pytest.approx(0.120, abs=5e-4)
    assert p.k == pytest.approx(8.055e6, rel=1e-3)


def test_n_bar_unity_when_sigma_is_d2_over_pi():
    d = 1e-5
    assert derive_params(make(coherence_area=d**2 / math.pi, pixel_size=d)).n_bar == pytest.approx(1.0, rel=1e-15)


def test_derived_values_exact():
    c = make()
    p = derive_params(c)
    assert p.I0 == math.pi**2 * c.coherence_area**2 * c.alpha_mag**4 / c.grating_width**4
    assert p.k == 2 * math.pi / c.wavelength
    assert p.nu * c.propagation_distance == pytest.approx(
        c.grating_width * c.detector_separation / c.wavelength, rel=1e-15)


def test_z_from_nu_reference():
    assert z_from_nu(make(), 0.12) == pytest.approx(64.10, rel=1e-3)


def test_z_doubles_when_nu_halves():
    c = make()
    assert z_from_nu(c, 0.06) == pytest.approx(2 * z_from_nu(c, 0.12), rel=1e-15)


@given(st.floats(1e-3, 1e3))
def test_z_nu_round_trip(nu):
    c = make()
    z = z_from_nu(c, nu)
    assert abs(nu_from_z(c, z) - nu) / nu <= 1e-12
    assert abs(z_from_nu(c, nu_from_z(c, z)) - z) / z <= 1e-12


@pytest.mark.parametrize("nu", [0.0, -1.0, math.inf, math.nan])
def test_z_from_nu_rejects(nu):
    with pytest.raises(ValueError):
        z_from_nu(make(), nu)


@pytest.mark.parametrize("field", ["wavelength", "grating_width", "pixel_size", "coherence_area",
                                   "alpha_mag", "detector_separation", "propagation_distance"])
@pytest.mark.parametrize("value", [0.0, -1.0, math.nan])
def test_rejects_nonpositive(field, value):
    with pytest.raises(ConfigError):
        make(**{field: value})


def test_rejects_coherence_cell_larger_than_pixel():
    with pytest.raises(ConfigError):
        make(coherence_area=(2e-5) ** 2, pixel_size=1e-5)


def test_rejects_pixel_larger_than_grating():
    with pytest.raises(ConfigError):
        make(pixel_size=4e-3)


def test_paraxial_bounds():
    with pytest.raises(ConfigError):
        make(propagation_distance=500 * 780e-9)
    with pytest.warns(UserWarning, match="paraxial"):
        make(propagation_distance=5e4 * 780e-9)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        make(propagation_distance=1.0)


def test_default_config_matches_reference_geometry():
    c = default_config()
    assert (c.grating_width, c.detector_separation, c.wavelength) == (3e-3, 2e-3, 780e-9)
    assert derive_params(c).nu == pytest.approx(0.12, rel=1e-6)
    assert math.sqrt(derive_params(c).I0) == pytest.approx(2.0, rel=1e-12)


def test_json_round_trip(tmp_path):
    c = default_config()
    path = tmp_path / "c.json"
    save_config(c, path)
    doc = json.loads(path.read_text())
    assert set(doc) == {"wavelength_m", "grating_width_m", "pixel_size_m", "coherence_area_m2",
                        "alpha_mag", "detector_separation_m", "propagation_distance_m", "seed"}
    assert load_config(path) == c


def test_json_errors(tmp_path):
    doc = default_config().to_json_dict()
    bad = dict(doc)
    del bad["alpha_mag"]
    with pytest.raises(ConfigError, match="missing"):
        PhysicalConfig.from_json_dict(bad)
    with pytest.raises(ConfigError, match="unknown"):
        PhysicalConfig.from_json_dict({**doc, "colour": 1})
    with pytest.raises(ConfigError, match="numeric"):
        PhysicalConfig.from_json_dict({**doc, "wavelength_m": "red"})
    path = tmp_path / "x.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(path)


def test_source_grid_resolution(config):
    x, step = source_grid(config)
    assert step <= math.sqrt(config.coherence_area) / 2 * (1 + 1e-12)
    assert x[0] - step / 2 == pytest.approx(-config.grating_width / 2)
    with pytest.raises(ValueError, match="resolve"):
        source_grid(config, math.sqrt(config.coherence_area))


def test_same_seed_bit_identical(small_config):
    a = sample_thermal_field(small_config, "H", 11)
    b = sample_thermal_field(small_config, "H", 11)
    assert a.values.tobytes() == b.values.tobytes()
    assert a.values.shape == (len(a.x), len(a.y))


def test_seed_reuse_flagged(small_config):
    with pytest.raises(ValueError, match="reused"):
        sample_unpolarized(small_config, 5, 5)


def test_covariance_kernel_normalization(config):
    # integrate over rho2 on a fine grid: n_bar to 1e-3
    x, step = source_grid(config)
    xs = x[np.abs(x) < 20 * math.sqrt(config.coherence_area)]
    X, Y = np.meshgrid(xs, xs)
    pts = np.stack([X, Y], axis=-1)
    k = covariance_kernel(config, np.zeros(2), pts)
    n_bar = derive_params(config).n_bar
    assert abs(k.sum() * step**2 / n_bar - 1) <= 1e-3


@pytest.fixture(scope="module")
def plane_samples(small_config):
    count = 4000
    centre, offset = [], []
    hv = []
    for s in range(count):
        h, v = sample_unpolarized(small_config, 2 * s + 1, 2 * s + 2)
        m = len(h.x) // 2
        centre.append(h.values[m, m])
        offset.append(h.values[m, m + 2])
        hv.append(np.conj(h.values[m, m]) * v.values[m, m])
    return np.array(centre), np.array(offset), np.array(hv), h


def _within(samples, target, k=3.0):
    se = samples.std(ddof=1) / math.sqrt(len(samples))
    return abs(samples.mean() - target) <= k * se


def test_plane_field_covariance(small_config, plane_samples):
    centre, offset, _, field = plane_samples
    n_bar = derive_params(small_config).n_bar
    sigma = small_config.coherence_area
    assert _within(np.abs(centre) ** 2, n_bar / (math.pi * sigma))
    dx = 2 * field.spacing
    assert _within((np.conj(centre) * offset).real,
                   n_bar / (math.pi * sigma) * math.exp(-dx**2 / sigma))
    assert _within((np.conj(centre) * offset).imag, 0.0)


def test_plane_field_circular_and_gaussian(plane_samples):
    centre = plane_samples[0]
    assert _within(centre.real, 0.0) and _within(centre.imag, 0.0)
    assert _within((centre**2).real, 0.0) and _within((centre**2).imag, 0.0)
    i = np.abs(centre) ** 2
    # <|S|^4> = 2 <|S|^2>^2, compare with a delta-method standard error
    ratio = np.mean(i**2) / np.mean(i) ** 2
    boot = np.random.default_rng(0).integers(len(i), size=(300, len(i)))
    se = np.std([np.mean(i[b] ** 2) / np.mean(i[b]) ** 2 for b in boot])
    assert abs(ratio - 2) <= 3 * se


def test_h_and_v_independent(plane_samples):
    hv = plane_samples[2]
    assert _within(hv.real, 0.0) and _within(hv.imag, 0.0)


def test_line_batch_covariance(config):
    rng = np.random.default_rng(3)
    x, step = source_grid(config)
    f = thermal_line_batch(config, rng, 20000, step, 64)
    sigma = config.coherence_area
    n_bar = derive_params(config).n_bar
    diag = np.abs(f[:, 10]) ** 2
    assert _within(diag, n_bar / math.sqrt(math.pi * sigma))
    lag = (np.conj(f[:, 10]) * f[:, 12]).real
    assert _within(lag, n_bar / math.sqrt(math.pi * sigma) * math.exp(-(2 * step) ** 2 / sigma))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**63 - 1))
def test_determinism_any_seed(seed):
    c = default_config()
    x, step = source_grid(c)
    a = thermal_line_batch(c, np.random.default_rng(np.random.SeedSequence(seed)), 2, step, 32)
    b = thermal_line_batch(c, np.random.default_rng(np.random.SeedSequence(seed)), 2, step, 32)
    assert np.array_equal(a, b)

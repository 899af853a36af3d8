import math

import numpy as np
import pytest

from qvcz.correlators import g2_closed_form
from qvcz.oracle import (McEstimate, McRunConfig, cross_validate, mc_g2, mc_photon_distribution,
                         write_validation_csv)
from qvcz.photonstats import CutoffError, bose_einstein, joint_photon_distribution, poisson
from qvcz.source import SourceModel

THERMAL = SourceModel(grating=False, polarizations=("H",))
COHERENT = SourceModel(grating=False, polarizations=("H",), frozen=True)


def test_run_config_validation():
    with pytest.raises(ValueError):
        McRunConfig(99, 1, nu=1.0)
    with pytest.raises(ValueError):
        McRunConfig(100, 1)
    with pytest.raises(ValueError):
        McRunConfig(100, 1, nu=1.0, z=2.0)
    with pytest.raises(ValueError):
        McRunConfig(100, 1, selector="HHH", nu=1.0)
    assert McRunConfig(100, 1, nu=1.0).to_dict()["realization_count"] == 100


def test_estimate_z_score():
    assert McEstimate(1.1, 0.05, 100).z_score(1.0) == pytest.approx(2.0)
    assert McEstimate(1.0, 0.0, 100).z_score(1.0) == 0.0
    assert McEstimate(1.1, 0.0, 100).z_score(1.0) == math.inf


def test_seed_determinism(config):
    run = McRunConfig(2000, 5, "HHHH", nu=0.5)
    a, b = mc_g2(run, config), mc_g2(run, config)
    assert (a.value, a.standard_error) == (b.value, b.standard_error)
    c = mc_g2(McRunConfig(2000, 6, "HHHH", nu=0.5), config)
    assert c.value != a.value


def test_workers_do_not_change_results(config):
    a = mc_g2(McRunConfig(3000, 5, "HHHH", nu=0.5, block_size=500), config)
    b = mc_g2(McRunConfig(3000, 5, "HHHH", nu=0.5, block_size=500, workers=3), config)
    assert a == b
    pa = mc_photon_distribution(McRunConfig(1000, 5, nu=0.5, block_size=250), config)
    pb = mc_photon_distribution(McRunConfig(1000, 5, nu=0.5, block_size=250, workers=4), config)
    assert np.array_equal(pa.distribution.p, pb.distribution.p)


def test_hhhh_matches_closed_form(config):
    est = mc_g2(McRunConfig(10_000, 11, "HHHH", nu=0.5), config)
    assert abs(est.z_score(g2_closed_form("HHHH", 0.5))) <= 3


def test_vhhv_below_one(config):
    est = mc_g2(McRunConfig(10_000, 12, "VHHV", nu=0.5), config)
    assert est.value + 3 * est.standard_error < 1


def test_thermal_coincident(config):
    run = McRunConfig(10_000, 13, "HHHH", nu=0.5, positions=(0.0, 0.0), source=THERMAL)
    est = mc_g2(run, config)
    assert abs(est.value - 2) <= 3 * est.standard_error


def test_frozen_field_is_coherent(config):
    run = McRunConfig(100, 1, "HHHH", nu=0.5, source=COHERENT)
    est = mc_g2(run, config)
    assert est.value == pytest.approx(1.0, abs=1e-12) and est.standard_error < 1e-12
    d = mc_photon_distribution(run, config)
    mean = float(np.arange(21) @ d.marginals[0])
    assert np.allclose(d.marginals[0], poisson(mean, 20), atol=1e-14)
    # zero variance up to the rounding of the one-pass sum of squares
    assert np.all(d.standard_error <= 1e-7 * d.distribution.p.max())


def test_standard_error_scaling(config):
    ses = [mc_g2(McRunConfig(n, 21, "HHHH", nu=1.0), config).standard_error
           for n in (1000, 4000, 16_000)]
    for small, big in zip(ses, ses[1:]):
        assert 1.0 <= small / big <= 4.0  # ideal ratio 2, within a factor of 2
    assert all(s > 0 for s in ses)


def test_thermal_distribution_bose_einstein(config):
    run = McRunConfig(20_000, 14, nu=0.5, source=THERMAL)
    d = mc_photon_distribution(run, config)
    be = bose_einstein(2.0, 20)
    z = (d.marginals[0] - be) / d.marginal_se[0]
    assert np.max(np.abs(z[:15])) <= 4  # 15 entries, 3 SE each would be marginal by chance
    assert np.abs((d.marginals[0] - be)[:15]).max() <= 5e-3


def test_distribution_matches_analytic(config):
    run = McRunConfig(20_000, 15, nu=1.0)
    d = mc_photon_distribution(run, config)
    ref = joint_photon_distribution(config, "HHHH", run.distance(config))
    assert d.distribution.tv_distance(ref) <= 0.02


def test_integer_counts_path(config):
    run = McRunConfig(20_000, 16, nu=1.0, integer_counts=True)
    d = mc_photon_distribution(run, config)
    ref = joint_photon_distribution(config, "HHHH", run.distance(config))
    assert d.distribution.tv_distance(ref) <= 0.03
    assert d.distribution.p.sum() == pytest.approx(1.0, abs=1e-3)


def test_distribution_rejects_off_diagonal(config):
    with pytest.raises(ValueError, match="off-diagonal"):
        mc_photon_distribution(McRunConfig(100, 1, "VHHV", nu=1.0), config)


def test_distribution_tail_flagged(config):
    with pytest.raises(CutoffError):
        mc_photon_distribution(McRunConfig(200, 1, nu=1.0, source=THERMAL), config, cutoff=5)


def test_mc_csv(config, tmp_path):
    d = mc_photon_distribution(McRunConfig(200, 1, nu=1.0), config, cutoff=8)
    d.to_csv(tmp_path / "mc.csv")
    lines = (tmp_path / "mc.csv").read_text().splitlines()
    assert lines[1] == "n1,n2,p,g2_tilde,stderr,n_realizations"
    assert lines[2].endswith(",200")


def test_cross_validate_small(config, tmp_path):
    rows = cross_validate(config, 2000, 3, nus=(0.5, 2.0), selectors=("HHHH", "VHHV"))
    assert len(rows) == 4
    assert all(abs(r.z_score) <= 4 for r in rows)
    assert all(abs(r.quadrature - r.analytic) <= 1e-4 for r in rows)
    write_validation_csv(rows, tmp_path / "v.csv", config, 2000)
    header = (tmp_path / "v.csv").read_text().splitlines()[0]
    assert header.startswith("nu,z_m,selector,g2,method,err_estimate,stderr,n_realizations")

"""Monte Carlo oracle: sampled thermal profiles through the grating to point detectors.

Each realization is a y-collapsed line profile Sigma(x) over the grating with
covariance n_bar / sqrt(pi sigma) * exp(-dx^2 / sigma). Detector amplitudes are
direct Fresnel sums over the line,

    E_aA(r) = sqrt(kappa) * |alpha| * (d / L) * sum_x K(r, x) P_aA(x) Sigma(x) dx,

which reproduce the analytic moments in the delta-correlated limit. The
source-polarization branches (A, B) use the same profile, as in the analytic
model, so both paths are driven by the same statistics but share no numerics
beyond the grating matrix and the Fresnel kernel.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .correlators import (CLOSED_FORM_SELECTORS, _selector, detector_positions, g2_closed_form,
                          g2_quadrature)
from .optics import check_sampling, fresnel_kernel, grating_matrix, identity_matrix
from .photonstats import CutoffError, JointPhotonDistribution, photon_scale
from .source import (POLARIZATIONS, PhysicalConfig, SourceModel, source_grid, thermal_line_batch,
                     nu_from_z, z_from_nu)

__all__ = ["McRunConfig", "McEstimate", "McDistribution", "mc_g2", "mc_photon_distribution",
           "cross_validate", "ValidationRow", "write_validation_csv", "VALIDATION_NUS",
           "MC_TAIL_LIMIT"]

VALIDATION_NUS = (0.2, 0.5, 1.0, 2.0, 3.5)
MC_TAIL_LIMIT = 1e-3
JACKKNIFE_GROUPS = 100


@dataclass(frozen=True)
class McRunConfig:
    """One Monte Carlo run. Give ``nu`` or ``z``; ``positions`` defaults to (+dX/2, -dX/2)."""

    realization_count: int
    rng_seed: int
    selector: str = "HHHH"
    nu: float | None = None
    z: float | None = None
    positions: tuple[float, float] | None = None
    spacing: float | None = None
    source: SourceModel = field(default_factory=SourceModel)
    block_size: int = 1000
    integer_counts: bool = False
    detector_width: float = 0.0
    workers: int = 1

    def __post_init__(self):
        if self.realization_count < 100:
            raise ValueError(f"realization_count must be >= 100, got {self.realization_count}")
        if (self.nu is None) == (self.z is None):
            raise ValueError("give exactly one of nu and z")
        if self.block_size < 1 or self.workers < 1:
            raise ValueError("block_size and workers must be >= 1")
        _selector(self.selector)

    def distance(self, config: PhysicalConfig) -> float:
        return self.z if self.z is not None else z_from_nu(config, self.nu)

    def to_dict(self) -> dict:
        return {"realization_count": self.realization_count, "rng_seed": self.rng_seed,
                "selector": str(self.selector), "nu": self.nu, "z": self.z,
                "positions": list(self.positions) if self.positions else None,
                "spacing": self.spacing, "source": self.source.to_dict(),
                "block_size": self.block_size, "integer_counts": self.integer_counts,
                "detector_width": self.detector_width}


@dataclass(frozen=True)
class McEstimate:
    value: float
    standard_error: float
    realization_count: int

    def z_score(self, reference: float) -> float:
        if self.standard_error == 0:
            return 0.0 if abs(self.value - reference) <= 1e-12 else math.inf
        return (self.value - reference) / self.standard_error


@dataclass
class McDistribution:
    """Empirical distribution with per-entry standard errors.

    ``marginals`` are the single-detector count distributions (not truncated in
    the other detector's count) with their standard errors in ``marginal_se``.
    """

    distribution: JointPhotonDistribution
    standard_error: np.ndarray
    realization_count: int
    marginals: tuple[np.ndarray, np.ndarray] = ()
    marginal_se: tuple[np.ndarray, np.ndarray] = ()

    def to_csv(self, path: str | Path) -> None:
        n = np.full(self.standard_error.shape, self.realization_count, dtype=np.int64)
        self.distribution.to_csv(path, {"stderr": self.standard_error, "n_realizations": n})


class _Detector:
    """Precomputed line weights: amplitude = field_batch @ weights[(a, A, r_index)]."""

    def __init__(self, config: PhysicalConfig, run: McRunConfig):
        z = run.distance(config)
        self.config = config
        self.z = z
        x, step = source_grid(config, run.spacing)
        self.x, self.step = x, step
        pos = run.positions if run.positions is not None else detector_positions(config)
        check_sampling(step, config.grating_width, abs(pos[0] - pos[1]) + run.detector_width,
                       z, config.wavelength)
        P = grating_matrix(x, config.grating_width) if run.source.grating else identity_matrix(x)
        amp = (math.sqrt(photon_scale(config, z)) * config.alpha_mag
               * config.pixel_size / config.grating_width)
        offsets = (np.linspace(-0.5, 0.5, 5) * run.detector_width if run.detector_width > 0
                   else np.zeros(1))
        self.weights = {}
        for ri, r in enumerate(pos):
            pts = np.stack([r + offsets, np.zeros_like(offsets)], axis=-1)
            src = np.stack([x, np.zeros_like(x)], axis=-1)
            K = fresnel_kernel(pts[:, None, :], src[None, :, :], z, config.wavelength)
            for a in POLARIZATIONS:
                for A in run.source.polarizations:
                    # (samples across the detector, x)
                    self.weights[(a, A, ri)] = amp * K * P.entry(a, A)[None, :] * step
        self.pols = run.source.polarizations

    def amplitudes(self, fields: np.ndarray, a: str, A: str, r_index: int) -> np.ndarray:
        return fields @ self.weights[(a, A, r_index)].T  # (R, samples)

    def intensity(self, fields, a, A, r_index) -> np.ndarray:
        return np.mean(np.abs(self.amplitudes(fields, a, A, r_index)) ** 2, axis=1)


def _frozen_batch(config: PhysicalConfig, count: int, n: int) -> np.ndarray:
    n_bar = math.pi * config.coherence_area / config.pixel_size**2
    return np.full((count, n), math.sqrt(n_bar / config.grating_width), dtype=complex)


def _blocks(run: McRunConfig):
    done, index = 0, 0
    while done < run.realization_count:
        size = min(run.block_size, run.realization_count - done)
        yield index, size
        done += size
        index += 1


def _block_fields(config: PhysicalConfig, run: McRunConfig, det: _Detector, index: int,
                  size: int) -> tuple[np.ndarray, np.random.Generator]:
    rng = np.random.default_rng(np.random.SeedSequence([int(run.rng_seed), index]))
    if run.source.frozen:
        return _frozen_batch(config, size, len(det.x)), rng
    return thermal_line_batch(config, rng, size, det.step, len(det.x)), rng


def _map_blocks(run: McRunConfig, work):
    blocks = list(_blocks(run))
    if run.workers > 1:
        with ThreadPoolExecutor(max_workers=run.workers) as pool:
            return list(pool.map(lambda b: work(*b), blocks))
    return [work(*b) for b in blocks]


def _g2_samples(config: PhysicalConfig, run: McRunConfig):
    s = _selector(run.selector)
    det = _Detector(config, run)

    def work(index, size):
        fields, _ = _block_fields(config, run, det, index, size)
        x = np.zeros(size, dtype=complex)  # sum_A E*_iA(r1) E_kA(r1)
        y = np.zeros(size, dtype=complex)  # sum_B E*_jB(r2) E_lB(r2)
        d_i = np.zeros(size)
        d_k = np.zeros(size)
        d_j = np.zeros(size)
        d_l = np.zeros(size)
        for A in det.pols:
            ei = det.amplitudes(fields, s.i, A, 0)
            ek = det.amplitudes(fields, s.k, A, 0)
            ej = det.amplitudes(fields, s.j, A, 1)
            el = det.amplitudes(fields, s.l, A, 1)
            x += np.mean(np.conj(ei) * ek, axis=1)
            y += np.mean(np.conj(ej) * el, axis=1)
            d_i += np.mean(np.abs(ei) ** 2, axis=1)
            d_k += np.mean(np.abs(ek) ** 2, axis=1)
            d_j += np.mean(np.abs(ej) ** 2, axis=1)
            d_l += np.mean(np.abs(el) ** 2, axis=1)
        return np.stack([(x * y).real, d_i, d_k, d_j, d_l], axis=1)

    return np.concatenate(_map_blocks(run, work), axis=0)


def _ratio(sums: np.ndarray, count: float) -> float:
    num, di, dk, dj, dl = sums / count
    den = math.sqrt(di * dk) * math.sqrt(dj * dl)
    if den <= 0:
        raise ZeroDivisionError("zero mean detector intensity")
    return num / den


def mc_g2(run: McRunConfig, config: PhysicalConfig) -> McEstimate:
    """g2_ijkl estimated as <numerator> / (<I1><I2>) with a grouped jackknife error.

    For off-diagonal selectors each detector's intensity is the geometric mean
    of the two projected intensities.
    """
    samples = _g2_samples(config, run)
    R = samples.shape[0]
    total = samples.sum(axis=0)
    estimate = _ratio(total, R)
    groups = min(JACKKNIFE_GROUPS, R)
    edges = np.linspace(0, R, groups + 1).astype(int)
    partial = np.array([_ratio(total - samples[lo:hi].sum(axis=0), R - (hi - lo))
                        for lo, hi in zip(edges[:-1], edges[1:])])
    se = math.sqrt((groups - 1) / groups * np.sum((partial - partial.mean()) ** 2))
    return McEstimate(float(estimate), float(se), R)


def mc_photon_distribution(run: McRunConfig, config: PhysicalConfig,
                           cutoff: int = 20) -> McDistribution:
    """Empirical p(n1, n2) by conditional-Poisson accumulation over realizations.

    Given one profile the branch (A, B) detector intensities are I1 = |E_iA(r1)|^2
    and I2 = |E_jB(r2)|^2; the branch average factorizes into a product of
    per-detector Poisson mixtures. ``run.integer_counts`` instead draws one
    branch and one integer count pair per realization.
    """
    s = _selector(run.selector)
    if not s.is_diagonal:
        raise ValueError(f"selector {s} is off-diagonal; no photon-number distribution")
    det = _Detector(config, run)
    N = cutoff + 1

    def work(index, size):
        fields, rng = _block_fields(config, run, det, index, size)
        I1 = np.stack([det.intensity(fields, s.i, A, 0) for A in det.pols], axis=1)
        I2 = np.stack([det.intensity(fields, s.j, B, 1) for B in det.pols], axis=1)
        if run.integer_counts:
            nb = len(det.pols)
            a = rng.integers(nb, size=size)
            b = rng.integers(nb, size=size)
            n1 = rng.poisson(I1[np.arange(size), a])
            n2 = rng.poisson(I2[np.arange(size), b])
            keep = (n1 < N) & (n2 < N)
            hist = np.zeros((N, N))
            np.add.at(hist, (n1[keep], n2[keep]), 1.0)
            m1 = np.bincount(n1[n1 < N], minlength=N).astype(float)
            m2 = np.bincount(n2[n2 < N], minlength=N).astype(float)
            return hist, hist.copy(), m1, m1.copy(), m2, m2.copy()
        total, total_sq = kernels.poisson_mixture_accumulate(I1, I2, cutoff)
        pm1 = kernels.poisson_table(I1, cutoff).mean(axis=1)
        pm2 = kernels.poisson_table(I2, cutoff).mean(axis=1)
        return (total, total_sq, pm1.sum(axis=0), (pm1**2).sum(axis=0), pm2.sum(axis=0),
                (pm2**2).sum(axis=0))

    parts = _map_blocks(run, work)
    R = run.realization_count
    sums = [sum(p[i] for p in parts) for i in range(6)]

    def stderr(total, total_sq):
        mean = total / R
        return mean, np.sqrt(np.maximum(total_sq / R - mean**2, 0.0) / max(R - 1, 1))

    mean, se = stderr(sums[0], sums[1])
    m1, se1 = stderr(sums[2], sums[3])
    m2, se2 = stderr(sums[4], sums[5])
    tail = max(0.0, 1.0 - float(mean.sum()))
    if tail > MC_TAIL_LIMIT:
        raise CutoffError(f"Monte Carlo tail mass {tail:.3e} > {MC_TAIL_LIMIT:.0e} at cutoff "
                          f"{cutoff}", tail, int(cutoff * 1.5) + 1)
    z = run.distance(config)
    dist = JointPhotonDistribution(p=mean, tail_mass=tail, selector=str(s), z=float(z),
                                   nu=nu_from_z(config, z), cutoff=int(cutoff),
                                   meta={"source": run.source.to_dict(), "method": "mc",
                                         "n_realizations": R, "seed": run.rng_seed})
    return McDistribution(dist, se, R, (m1, m2), (se1, se2))


@dataclass
class ValidationRow:
    selector: str
    nu: float
    analytic: float
    quadrature: float
    mc: float
    stderr: float
    z_score: float


def cross_validate(config: PhysicalConfig, realizations: int = 10_000, seed: int | None = None,
                   nus=VALIDATION_NUS, selectors=CLOSED_FORM_SELECTORS,
                   workers: int = 1) -> list[ValidationRow]:
    """MC g2 against the closed form for every (selector, nu); z-scores per cell."""
    seed = config.seed if seed is None else seed
    rows = []
    for n, sel in enumerate(selectors):
        for m, nu in enumerate(nus):
            run = McRunConfig(realizations, seed + 1000 * n + m, str(sel), nu=float(nu),
                              workers=workers)
            est = mc_g2(run, config)
            ref = g2_closed_form(sel, nu)
            rows.append(ValidationRow(str(sel), float(nu), ref, g2_quadrature(config, sel, nu)[0],
                                      est.value, est.standard_error, est.z_score(ref)))
    return rows


def write_validation_csv(rows: list[ValidationRow], path: str | Path, config: PhysicalConfig,
                         realizations: int) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["nu", "z_m", "selector", "g2", "method", "err_estimate", "stderr",
                         "n_realizations", "g2_closed", "z_score"])
        for r in rows:
            writer.writerow([repr(r.nu), repr(z_from_nu(config, r.nu)), r.selector, repr(r.mc),
                             "mc", repr(r.stderr), repr(r.stderr), realizations,
                             repr(r.analytic), repr(r.z_score)])


"""Gaussian amplitude covariances and joint photon-number distributions at two detectors.

The post-selected state is an equal-weight mixture over the source-polarization
branches (A, B): in branch (A, B) detector 1 sees eta_iA(r1) and detector 2 sees
eta_jB(r2), both driven by the same random profile. Each branch is a zero-mean
two-mode classical Gaussian field, so its photocount distribution follows from
the generating function 1 / det(1 + Gamma (1 - s)).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from . import kernels
from .correlators import _selector, detector_positions, mode_moment
from .source import PhysicalConfig, SourceModel, nu_from_z, z_from_nu

__all__ = [
    "AmplitudeCovariance", "JointPhotonDistribution", "CutoffError", "OffDiagonalSelector",
    "photon_scale", "build_covariance", "branch_parameters", "joint_photon_distribution",
    "single_detector_distribution", "g2_self_from_distribution", "g2_cross_from_distribution",
    "multiphoton_g2_tilde", "bose_einstein", "poisson", "two_mode_pnd_fft",
    "total_variation", "TAIL_LIMIT", "DEFAULT_CUTOFF",
]

DEFAULT_CUTOFF = 20
TAIL_LIMIT = 1e-6


class CutoffError(ValueError):
    """The Fock cutoff leaves more than the allowed probability in the tail."""

    def __init__(self, message: str, tail_mass: float, suggested_cutoff: int):
        super().__init__(message)
        self.tail_mass = tail_mass
        self.suggested_cutoff = suggested_cutoff


class OffDiagonalSelector(ValueError):
    """Photon-number distributions are defined only for i = k and j = l."""


def photon_scale(config: PhysicalConfig, z: float | None = None) -> float:
    """Converts amplitude moments into mean photon numbers: (lambda z)^2 / L.

    A point detector that collects one transverse coherence area of the
    diffracted field, with the y extent of the grating, sees
    kappa * <|E|^2> photons.
    """
    z = config.propagation_distance if z is None else z
    return (config.wavelength * z) ** 2 / config.grating_width


@dataclass(frozen=True)
class AmplitudeCovariance:
    """Circular Gaussian amplitudes: complex C_pq = <a_p* a_q>, or real (mu, Gamma).

    The real vector is t = (Re a_1..Re a_n, Im a_1..Im a_n).
    """

    C: np.ndarray
    labels: tuple = ()

    @property
    def mu(self) -> np.ndarray:
        return np.zeros(2 * self.C.shape[0])

    @property
    def gamma(self) -> np.ndarray:
        re, im = self.C.real / 2, self.C.imag / 2
        return np.block([[re, im], [-im, re]])

    @classmethod
    def from_real(cls, gamma: np.ndarray, labels: tuple = ()) -> "AmplitudeCovariance":
        n = gamma.shape[0] // 2
        return cls(2 * gamma[:n, :n] + 2j * gamma[:n, n:], labels)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.C - self.C.conj().T)) <= tol * max(1.0, np.max(np.abs(self.C))))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh((self.C + self.C.conj().T) / 2)[0])


def build_covariance(config: PhysicalConfig, selector, combo: tuple, z: float | None = None,
                     source: SourceModel | None = None) -> AmplitudeCovariance:
    """Covariance of (eta_iA(r1), eta_jB(r2), eta_kC(r1), eta_lD(r2)) in photon units.

    ``combo`` = (A, B, C, D) are the source-polarization labels; the thermal
    branches use (A, B, A, B).
    """
    s = _selector(selector)
    z = config.propagation_distance if z is None else z
    kappa = photon_scale(config, z)
    r1, r2 = detector_positions(config)
    modes = [(s.i, combo[0], r1), (s.j, combo[1], r2), (s.k, combo[2], r1), (s.l, combo[3], r2)]
    C = np.empty((4, 4), dtype=complex)
    for p, q in product(range(4), repeat=2):
        if q < p:
            C[p, q] = np.conj(C[q, p])
            continue
        a, A, ra = modes[p]
        b, B, rb = modes[q]
        C[p, q] = kappa * mode_moment(config, a, A, b, B, ra, rb, z, source)[0]
    labels = tuple(f"{a}{A}@r{1 if r == r1 else 2}" for a, A, r in modes)
    return AmplitudeCovariance(C, labels)


def branch_parameters(config: PhysicalConfig, selector, z: float | None = None,
                      source: SourceModel | None = None):
    """Per-branch (weight, a, b, |c|^2): detector means and cross-coherence in photons."""
    s = _selector(selector)
    source = source or SourceModel()
    z = config.propagation_distance if z is None else z
    kappa = photon_scale(config, z)
    r1, r2 = detector_positions(config)
    pols = source.polarizations
    w = 1.0 / len(pols) ** 2
    out = []
    for A, B in product(pols, repeat=2):
        a = kappa * mode_moment(config, s.i, A, s.i, A, r1, r1, z, source)[0].real
        b = kappa * mode_moment(config, s.j, B, s.j, B, r2, r2, z, source)[0].real
        c = kappa * mode_moment(config, s.i, A, s.j, B, r1, r2, z, source)[0]
        out.append((w, a, b, abs(c) ** 2))
    return out


def bose_einstein(mean: float, cutoff: int) -> np.ndarray:
    n = np.arange(cutoff + 1)
    if mean == 0:
        return (n == 0).astype(float)
    return np.exp(n * math.log(mean / (1 + mean)) - math.log1p(mean))


def poisson(mean: float, cutoff: int) -> np.ndarray:
    return kernels.poisson_table(np.asarray(mean, dtype=float), cutoff)


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.sum(np.abs(np.asarray(p) - np.asarray(q))))


def two_mode_pnd_fft(a: float, b: float, c2: float, cutoff: int, points: int = 256) -> np.ndarray:
    """Independent route: invert the generating function on the unit torus by FFT."""
    s = np.exp(2j * math.pi * np.arange(points) / points)
    t1 = (1 - s)[:, None]
    t2 = (1 - s)[None, :]
    G = 1.0 / ((1 + a * t1) * (1 + b * t2) - c2 * t1 * t2)
    coeff = np.fft.fft2(G) / points**2  # fft uses exp(-2 pi i jn/M): picks the s^n coefficient
    return coeff[: cutoff + 1, : cutoff + 1].real


@dataclass
class JointPhotonDistribution:
    p: np.ndarray
    tail_mass: float
    selector: str
    z: float
    nu: float
    cutoff: int
    meta: dict = field(default_factory=dict)

    def normalized(self) -> np.ndarray:
        return self.p / self.p.sum()

    def marginals(self) -> tuple[np.ndarray, np.ndarray]:
        return self.p.sum(axis=1), self.p.sum(axis=0)

    def means(self) -> tuple[float, float]:
        n = np.arange(self.cutoff + 1)
        m1, m2 = self.marginals()
        return float(n @ m1), float(n @ m2)

    def g2_cross(self) -> float:
        return g2_cross_from_distribution(self.p)

    def g2_self(self, detector: int = 1) -> float:
        return g2_self_from_distribution(self.marginals()[detector - 1])

    def g2_tilde(self, n1: int, n2: int) -> float:
        return multiphoton_g2_tilde(self.p, n1, n2)

    def g2_tilde_table(self) -> np.ndarray:
        q = self.normalized()
        m1, m2 = q.sum(axis=1), q.sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(np.outer(m1, m2) > 0, q / np.outer(m1, m2), np.nan)

    def tv_distance(self, other) -> float:
        q = other.p if isinstance(other, JointPhotonDistribution) else np.asarray(other)
        return total_variation(self.p, q)

    def header(self) -> dict:
        return {"selector": self.selector, "nu": self.nu, "z_m": self.z, "cutoff": self.cutoff,
                "tail_mass": self.tail_mass, **self.meta}

    def to_csv(self, path: str | Path, extra_columns: dict | None = None) -> None:
        """Rows n1,n2,p,g2_tilde after a single ``# {json}`` header line."""
        table = self.g2_tilde_table()
        extra = extra_columns or {}
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write("# " + json.dumps(self.header(), sort_keys=True) + "\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["n1", "n2", "p", "g2_tilde", *extra])
            for n1, n2 in product(range(self.cutoff + 1), repeat=2):
                writer.writerow([n1, n2, repr(float(self.p[n1, n2])), repr(float(table[n1, n2])),
                                 *(_cell(col[n1, n2]) for col in extra.values())])


def _cell(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _mix(branches, cutoff: int, frozen: bool) -> np.ndarray:
    p = np.zeros((cutoff + 1, cutoff + 1))
    for w, a, b, c2 in branches:
        if frozen:
            p += w * np.outer(poisson(a, cutoff), poisson(b, cutoff))
        else:
            p += w * kernels.two_mode_pnd(a, b, c2, cutoff)
    return p


def joint_photon_distribution(config: PhysicalConfig, selector, z: float | None = None,
                              cutoff: int = DEFAULT_CUTOFF, source: SourceModel | None = None,
                              tail_limit: float = TAIL_LIMIT) -> JointPhotonDistribution:
    """p(n1, n2) for a diagonal selector (i = k, j = l) up to ``cutoff`` photons.

    With ``source.frozen`` every branch is a pair of coherent states with the
    branch mean photon numbers (Poisson statistics).

    Raises
    ------
    OffDiagonalSelector
        For i != k or j != l; those correlators are not probability distributions.
    CutoffError
        If the tail mass exceeds ``tail_limit``; carries a sufficient cutoff.
    """
    s = _selector(selector)
    if not s.is_diagonal:
        raise OffDiagonalSelector(
            f"selector {s} is off-diagonal; photon-number distributions are only defined for "
            "i=k and j=l (e.g. HHHH, HVHV), as in the multiphoton (n1, n2) analysis")
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    source = source or SourceModel()
    z = config.propagation_distance if z is None else z
    branches = branch_parameters(config, s, z, source)
    p = _mix(branches, cutoff, source.frozen)
    tail = max(0.0, 1.0 - float(p.sum()))
    if tail > tail_limit:
        suggested = cutoff
        while suggested < 10_000:
            suggested = int(suggested * 1.5) + 1
            if 1.0 - _mix(branches, suggested, source.frozen).sum() <= tail_limit:
                break
        raise CutoffError(f"tail mass {tail:.3e} > {tail_limit:.0e} at cutoff {cutoff}; "
                          f"use cutoff >= {suggested}", tail, suggested)
    return JointPhotonDistribution(p=p, tail_mass=tail, selector=str(s), z=float(z),
                                   nu=nu_from_z(config, z), cutoff=int(cutoff),
                                   meta={"source": source.to_dict()})


def single_detector_distribution(config: PhysicalConfig, projection: str, detector: int = 1,
                                 z: float | None = None, cutoff: int = DEFAULT_CUTOFF,
                                 source: SourceModel | None = None) -> np.ndarray:
    """Counts at one detector: an equal mixture over source polarizations of
    Bose-Einstein (or Poisson, if frozen) distributions."""
    source = source or SourceModel()
    z = config.propagation_distance if z is None else z
    r = detector_positions(config)[detector - 1]
    kappa = photon_scale(config, z)
    out = np.zeros(cutoff + 1)
    for A in source.polarizations:
        mean = kappa * mode_moment(config, projection, A, projection, A, r, r, z, source)[0].real
        out += (poisson(mean, cutoff) if source.frozen else bose_einstein(mean, cutoff))
    return out / len(source.polarizations)


def g2_self_from_distribution(p) -> float:
    """sum n(n-1) p(n) / (sum n p(n))^2 for a single-detector distribution."""
    p = np.asarray(p, dtype=float)
    n = np.arange(p.size)
    mean = float(n @ p)
    if mean <= 0:
        raise ValueError("zero mean photon number: g2 undefined")
    return float((n * (n - 1)) @ p) / mean**2


def g2_cross_from_distribution(p) -> float:
    """sum n1 n2 p / (sum n1 p * sum n2 p)."""
    p = np.asarray(p, dtype=float)
    n = np.arange(p.shape[0])
    m1, m2 = float(n @ p.sum(axis=1)), float(n @ p.sum(axis=0))
    if m1 <= 0 or m2 <= 0:
        raise ValueError("zero mean photon number: g2 undefined")
    return float(n @ p @ n) / (m1 * m2)


def multiphoton_g2_tilde(p, n1: int, n2: int) -> float:
    """p(n1, n2) / (sum_n p(n, n2) * sum_m p(n1, m)) on the normalized table."""
    p = p.p if isinstance(p, JointPhotonDistribution) else np.asarray(p, dtype=float)
    N = p.shape[0] - 1
    if not (0 <= n1 <= N and 0 <= n2 <= N):
        raise IndexError(f"(n1, n2) = ({n1}, {n2}) outside the cutoff {N}")
    q = p / p.sum()
    col, row = q[:, n2].sum(), q[n1, :].sum()
    if col <= 0 or row <= 0:
        raise ValueError(f"vanishing marginal at (n1, n2) = ({n1}, {n2}): g2_tilde undefined")
    return float(q[n1, n2] / (col * row))


def nu_or_z(config: PhysicalConfig, nu: float | None, z: float | None) -> float:
    if (nu is None) == (z is None):
        raise ValueError("give exactly one of nu and z")
    return z if z is not None else z_from_nu(config, nu)


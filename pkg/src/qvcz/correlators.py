"""First- and second-order correlation functions behind the polarization grating.

Conventions
-----------
Detectors sit at r1 = +dX/2 and r2 = -dX/2 on the x axis. Positions are given
as x coordinates. The y integral factors out of every moment and cancels in
every normalized quantity, so only the x-line integrals over the grating
aperture are evaluated. With u = x/L in [-1/2, 1/2],

    m(aA, bB; r1, r2) = sqrt(I0) * L / (lambda z)^2 * exp(i k (r2^2 - r1^2) / 2z)
                        * int du P_aA(u) P_bB(u) exp(-i k L u (r2 - r1) / z)

is the amplitude moment <eta*_aA(r1) eta_bB(r2)> of projection a fed by source
polarization A. The four-point function follows from the Gaussian moment
theorem with source polarization A at detector 1 and B at detector 2:

    G2_ijkl = sum_{A,B} m(iA,kA; r1,r1) m(jB,lB; r2,r2) + m(iA,lB; r1,r2) m(jB,kA; r2,r1)

and g2 = G2 / G1^2 with G1 = sqrt(I0) L / (2 z^2 lambda^2).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from .optics import grating_matrix
from .quadrature import QuadratureError, integrate, oscillation_panels
from .source import POLARIZATIONS, PhysicalConfig, SourceModel, derive_params, z_from_nu

__all__ = [
    "PolSelector", "UnsupportedSelector", "QuadratureError", "CoherenceCurve",
    "detector_positions", "g1_closed_form", "mode_moment", "second_moment",
    "second_moment_matrix", "g2_closed_form", "g2_quadrature", "g2_complex", "g2_from_moments",
    "four_point_g2", "scan_curve", "CLOSED_FORM_SELECTORS", "CSV_COLUMNS",
]

CLOSED_FORM_SELECTORS = ("HHHH", "HVHV", "VHHV", "HHVV")
CSV_COLUMNS = ("nu", "z_m", "selector", "g2", "method", "err_estimate")
QUAD_TOL = 1e-8


class UnsupportedSelector(ValueError):
    """No closed form is known for this selector; use the quadrature route."""


@dataclass(frozen=True)
class PolSelector:
    """Post-selection indices (i, j, k, l) of G2_ijkl."""

    i: str
    j: str
    k: str
    l: str  # noqa: E741

    def __post_init__(self):
        for name in "ijkl":
            if getattr(self, name) not in POLARIZATIONS:
                raise ValueError(f"selector index {name}={getattr(self, name)!r} not in {POLARIZATIONS}")

    @classmethod
    def from_string(cls, text: str) -> "PolSelector":
        text = text.strip().upper()
        if len(text) != 4 or any(c not in POLARIZATIONS for c in text):
            raise ValueError(f"selector must be four letters from H/V, got {text!r}")
        return cls(*text)

    @property
    def is_diagonal(self) -> bool:
        return self.i == self.k and self.j == self.l

    def swapped(self) -> "PolSelector":
        """Selector seen with the two detectors exchanged."""
        return PolSelector(self.j, self.i, self.l, self.k)

    def __str__(self) -> str:
        return self.i + self.j + self.k + self.l


def _selector(sel) -> PolSelector:
    return sel if isinstance(sel, PolSelector) else PolSelector.from_string(sel)


def detector_positions(config: PhysicalConfig) -> tuple[float, float]:
    return config.detector_separation / 2, -config.detector_separation / 2


def g1_closed_form(config: PhysicalConfig, z: float | None = None) -> float:
    z = config.propagation_distance if z is None else z
    sqrt_i0 = math.sqrt(derive_params(config).I0)
    return sqrt_i0 * config.grating_width / (2 * z**2 * config.wavelength**2)


def _projection(source: SourceModel):
    if source.grating:
        def proj(a, A, u):
            return grating_matrix(u, 1.0).entry(a, A)
    else:
        def proj(a, A, u):
            return np.full_like(u, 1.0 if a == A else 0.0)
    return proj


def _line_integral(a: str, A: str, b: str, B: str, rate: float, source: SourceModel,
                   tol: float = QUAD_TOL) -> tuple[complex, float]:
    # int_{-1/2}^{1/2} du P_aA(u) P_bB(u) exp(i rate u)
    proj = _projection(source)

    def f(u):
        return proj(a, A, u) * proj(b, B, u) * np.exp(1j * rate * u)

    try:
        return integrate(f, -0.5, 0.5, tol=tol, panels=oscillation_panels(rate))
    except QuadratureError as exc:
        raise QuadratureError(f"moment <{a}{A},{b}{B}> at phase rate {rate:.4g}: {exc}",
                              exc.estimate, exc.error) from None


def _moment_scale(config: PhysicalConfig, r1: float, r2: float, z: float):
    k = 2 * math.pi / config.wavelength
    L = config.grating_width
    scale = math.sqrt(derive_params(config).I0) * L / (config.wavelength * z) ** 2
    phase = np.exp(1j * k * (r2**2 - r1**2) / (2 * z))
    rate = -k * L * (r2 - r1) / z
    return scale * phase, rate


def mode_moment(config: PhysicalConfig, a: str, A: str, b: str, B: str, r1: float, r2: float,
                z: float | None = None, source: SourceModel | None = None,
                tol: float = QUAD_TOL) -> tuple[complex, float]:
    """<eta*_aA(r1) eta_bB(r2)>: grating columns A and B applied to one common profile.

    ``a``, ``b`` are the detected projections. A physical two-point function of
    the unpolarized source is the A == B sum (see :func:`second_moment`); the
    A != B moments enter the four-point pairings. Returns (value, abs. error).
    """
    z = config.propagation_distance if z is None else z
    source = source or SourceModel()
    if A not in source.polarizations or B not in source.polarizations:
        return 0j, 0.0
    pref, rate = _moment_scale(config, r1, r2, z)
    val, err = _line_integral(a, A, b, B, rate, source, tol)
    return pref * val, abs(pref) * err


def second_moment(config: PhysicalConfig, A: str, B: str, r1: float, r2: float,
                  z: float | None = None, source: SourceModel | None = None,
                  tol: float = QUAD_TOL) -> complex:
    """<E*_A(r1) E_B(r2)> for detected polarizations A, B, summed over source polarizations.

    At A == B and r1 == r2 this is G1.

    Raises
    ------
    QuadratureError
        If a line integral does not converge; the exception carries the estimate.
    """
    source = source or SourceModel()
    return sum(mode_moment(config, A, C, B, C, r1, r2, z, source, tol)[0]
               for C in source.polarizations)


def second_moment_matrix(config: PhysicalConfig, z: float | None = None,
                         source: SourceModel | None = None) -> np.ndarray:
    """4x4 Hermitian matrix over (polarization, detector) = (H,r1), (V,r1), (H,r2), (V,r2)."""
    r = detector_positions(config)
    labels = [(p, pos) for pos in r for p in POLARIZATIONS]
    C = np.empty((4, 4), dtype=complex)
    for (m, (A, ra)), (n, (B, rb)) in product(enumerate(labels), enumerate(labels)):
        if n < m:
            C[m, n] = np.conj(C[n, m])
        else:
            C[m, n] = second_moment(config, A, B, ra, rb, z, source)
    return C


def g2_from_moments(selector, moment) -> complex:
    """Assemble G2_ijkl / G1^2 from a moment function ``moment(a, A, b, B, detector_pair)``.

    ``detector_pair`` is one of "11", "22", "12", "21"; values must already be
    normalized by G1.
    """
    s = _selector(selector)
    total = 0j
    for A, B in product(POLARIZATIONS, repeat=2):
        total += moment(s.i, A, s.k, A, "11") * moment(s.j, B, s.l, B, "22")
        total += moment(s.i, A, s.l, B, "12") * moment(s.j, B, s.k, A, "21")
    return total


def g2_complex(config: PhysicalConfig, selector, nu: float, swap_detectors: bool = False,
               source: SourceModel | None = None, tol: float = QUAD_TOL) -> tuple[complex, float]:
    """Normalized G2_ijkl at plane ``nu`` without the realness check.

    Selectors that are not intensity correlations (e.g. HVHH) are complex in general.
    Returns (value, error estimate).
    """
    source = source or SourceModel()
    z = z_from_nu(config, nu)
    r1, r2 = detector_positions(config)
    if swap_detectors:
        r1, r2 = r2, r1
    pos = {"1": r1, "2": r2}
    g1 = g1_closed_form(config, z)
    cache: dict = {}
    err_total = [0.0]

    def moment(a, A, b, B, pair):
        key = (a, A, b, B, pair)
        if key not in cache:
            val, err = mode_moment(config, a, A, b, B, pos[pair[0]], pos[pair[1]], z, source, tol)
            cache[key] = val / g1
            err_total[0] = max(err_total[0], err / g1)
        return cache[key]

    value = g2_from_moments(selector, moment)
    # each product has two factors of magnitude <= ~2, eight products
    return value, 8 * 4 * err_total[0]


def g2_quadrature(config: PhysicalConfig, selector, nu: float, swap_detectors: bool = False,
                  source: SourceModel | None = None, tol: float = QUAD_TOL) -> tuple[float, float]:
    """g2_ijkl at plane ``nu`` by quadrature of the two Gaussian pairings.

    Returns (g2, error estimate).

    Raises
    ------
    ArithmeticError
        If the imaginary residue exceeds 1e-10; use :func:`g2_complex` for
        selectors whose correlator is complex.
    """
    value, err = g2_complex(config, selector, nu, swap_detectors, source, tol)
    scale = max(1.0, abs(value))
    if abs(value.imag) > 1e-10 * scale:
        raise ArithmeticError(f"g2 has imaginary residue {value.imag:.3e}; "
                              f"selector {_selector(selector)} is complex here, see g2_complex")
    return float(value.real), err


def _sinc(x):
    return np.sinc(x)


def g2_closed_form(selector, nu):
    """Closed-form g2 for HHHH, HVHV, VHHV and HHVV with sinc(x) = sin(pi x)/(pi x).

    Accepts scalar or array ``nu``; even in ``nu``.
    """
    s = str(_selector(selector))
    if s not in CLOSED_FORM_SELECTORS:
        raise UnsupportedSelector(f"no closed form for selector {s}; use the quadrature method")
    nu = np.asarray(nu, dtype=float)
    a = _sinc(nu)
    b1, b2 = _sinc(nu + 1), _sinc(nu + 2)
    c1, c2 = _sinc(1 - nu), _sinc(2 - nu)
    if s == "HHHH":
        num = (10 * a**2 + 2 * (6 * b1 + b2 + 6 * c1 + c2) * a + 6 * b1**2 + b2**2
               + 6 * c1**2 + c2**2 + 4 * b1 * b2 + 4 * (b1 + c2) * c1 + 16)
    elif s == "HVHV":
        num = 2 * a**2 - 2 * (b2 + c2) * a + 2 * (c1 - b1) ** 2 + b2**2 + c2**2 + 16
    elif s == "VHHV":
        num = 6 * a**2 - 2 * (b2 + c2) * a + 2 * (c1 - b1) ** 2 - b2**2 - c2**2
    else:
        num = 2 * a**2 - 2 * (b2 + c2) * a + 2 * (c1 - b1) ** 2 + b2**2 + c2**2
    out = num / 16
    return float(out) if out.ndim == 0 else out


def four_point_g2(config: PhysicalConfig, selector, nu: float, n: int = 16,
                  width_cells: float = 0.5) -> float:
    """g2 from the unreduced four-point integral on an n^4 midpoint grid.

    The source field on the grid has the Gaussian covariance
    exp(-(x - x')^2 / sigma) with sqrt(sigma) = ``width_cells`` grid cells,
    normalized to unit mass on the infinite lattice. The fourth moment is
    expanded by the Gaussian moment theorem but the four sums are carried out
    in full, so agreement with :func:`g2_quadrature` checks the collapse to a
    product of single integrals.
    """
    s = _selector(selector)
    h = 1.0 / n
    u = -0.5 + (np.arange(n) + 0.5) * h
    P = grating_matrix(u, 1.0)
    lag = np.arange(-n + 1, n)
    weights = np.exp(-((lag / width_cells) ** 2))
    weights /= np.sum(np.exp(-((np.arange(-10 * n, 10 * n + 1) / width_cells) ** 2)))
    cov = weights[np.subtract.outer(np.arange(n), np.arange(n)) + n - 1] / h
    # <S*(1) S*(2) S(3) S(4)> = C13 C24 + C14 C23
    fourth = (np.einsum("ac,bd->abcd", cov, cov) + np.einsum("ad,bc->abcd", cov, cov))
    # x-dependent Fresnel phase of K(r, x) in units of L: exp(i pi F (u - r/L)^2)
    fresnel = nu * config.grating_width / config.detector_separation
    r1, r2 = (r / config.grating_width for r in detector_positions(config))
    k1 = np.exp(1j * math.pi * fresnel * (u - r1) ** 2)
    k2 = np.exp(1j * math.pi * fresnel * (u - r2) ** 2)
    total = 0j
    for A, B in product(POLARIZATIONS, repeat=2):
        w1 = np.conj(k1) * P.entry(s.i, A) * h
        w2 = np.conj(k2) * P.entry(s.j, B) * h
        w3 = k1 * P.entry(s.k, A) * h
        w4 = k2 * P.entry(s.l, B) * h
        total += np.einsum("abcd,a,b,c,d->", fourth, w1, w2, w3, w4)
    return float(total.real / 0.25)


@dataclass
class CoherenceCurve:
    selector: str
    nu: np.ndarray
    z: np.ndarray
    g2: np.ndarray
    method: list[str]
    err_estimate: np.ndarray
    errors: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.nu) > 1 and not np.all(np.diff(self.nu) > 0):
            raise ValueError("nu grid must be strictly increasing")

    def rows(self):
        for i in range(len(self.nu)):
            yield (repr(float(self.nu[i])), repr(float(self.z[i])), self.selector,
                   repr(float(self.g2[i])), self.method[i], repr(float(self.err_estimate[i])))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            writer.writerows(self.rows())


def scan_curve(config: PhysicalConfig, selector, nu_grid, method: str = "auto") -> CoherenceCurve:
    """g2 over a strictly increasing nu grid.

    ``method`` is "closed", "quadrature" or "auto" (closed form where one exists).
    Per-point failures are collected in ``curve.errors`` and leave NaN values.
    """
    s = _selector(selector)
    nu = np.asarray(nu_grid, dtype=float)
    if nu.ndim != 1 or nu.size == 0:
        raise ValueError("nu grid must be a nonempty 1-D sequence")
    if nu.size > 1 and not np.all(np.diff(nu) > 0):
        raise ValueError("nu grid must be strictly increasing")
    if method not in ("auto", "closed", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    if method == "closed" and str(s) not in CLOSED_FORM_SELECTORS:
        raise UnsupportedSelector(f"no closed form for selector {s}")
    use_closed = method == "closed" or (method == "auto" and str(s) in CLOSED_FORM_SELECTORS)
    values = np.full(nu.size, np.nan)
    errs = np.zeros(nu.size)
    z = np.full(nu.size, np.nan)
    errors = {}
    for n, v in enumerate(nu):
        try:
            z[n] = z_from_nu(config, v)
            if use_closed:
                values[n] = g2_closed_form(s, v)
            else:
                values[n], errs[n] = g2_quadrature(config, s, v)
        except (QuadratureError, ArithmeticError, ValueError) as exc:
            errors[float(v)] = str(exc)
    tag = "closed" if use_closed else "quadrature"
    return CoherenceCurve(str(s), nu, z, values, [tag] * nu.size, errs, errors)

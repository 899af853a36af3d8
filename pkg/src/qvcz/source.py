"""Unpolarized multimode thermal source: configuration, derived parameters, field sampling."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve

POLARIZATIONS = ("H", "V")

# JSON field name -> PhysicalConfig attribute
_JSON_FIELDS = {
    "wavelength_m": "wavelength",
    "grating_width_m": "grating_width",
    "pixel_size_m": "pixel_size",
    "coherence_area_m2": "coherence_area",
    "alpha_mag": "alpha_mag",
    "detector_separation_m": "detector_separation",
    "propagation_distance_m": "propagation_distance",
}


class ConfigError(ValueError):
    """Raised when a physical configuration violates its invariants."""


@dataclass(frozen=True)
class PhysicalConfig:
    """Experiment constants, SI units throughout."""

    wavelength: float
    grating_width: float
    pixel_size: float
    coherence_area: float
    alpha_mag: float
    detector_separation: float
    propagation_distance: float
    seed: int = 0

    def __post_init__(self):
        validate_config(self)

    def with_distance(self, z: float) -> "PhysicalConfig":
        return PhysicalConfig(**{**asdict(self), "propagation_distance": float(z)})

    def to_json_dict(self) -> dict:
        out = {key: getattr(self, attr) for key, attr in _JSON_FIELDS.items()}
        out["seed"] = self.seed
        return out

    @classmethod
    def from_json_dict(cls, doc: dict) -> "PhysicalConfig":
        missing = [key for key in _JSON_FIELDS if key not in doc]
        if missing:
            raise ConfigError(f"config is missing fields: {', '.join(missing)}")
        unknown = set(doc) - set(_JSON_FIELDS) - {"seed"}
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(sorted(unknown))}")
        kwargs = {}
        for key, attr in _JSON_FIELDS.items():
            try:
                kwargs[attr] = float(doc[key])
            except (TypeError, ValueError):
                raise ConfigError(f"{key} must be numeric, got {doc[key]!r}") from None
        seed = doc.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")
        return cls(seed=seed, **kwargs)


def validate_config(config: PhysicalConfig) -> None:
    for name in ("wavelength", "grating_width", "pixel_size", "coherence_area",
                 "alpha_mag", "detector_separation", "propagation_distance"):
        value = getattr(config, name)
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
            raise ConfigError(f"{name} must be finite and strictly positive, got {value!r}")
    coherence_len = math.sqrt(config.coherence_area)
    if coherence_len > config.pixel_size:
        raise ConfigError(
            f"coherence cell sqrt(sigma)={coherence_len:.3e} m exceeds pixel size "
            f"d={config.pixel_size:.3e} m"
        )
    if config.pixel_size > config.grating_width:
        raise ConfigError(
            f"pixel size d={config.pixel_size:.3e} m exceeds grating width "
            f"L={config.grating_width:.3e} m"
        )
    ratio = config.propagation_distance / config.wavelength
    if ratio < 1e3:
        raise ConfigError(f"z/lambda = {ratio:.3g} < 1e3: outside the paraxial regime")
    if ratio < 1e5:
        warnings.warn(f"z/lambda = {ratio:.3g} < 1e5: paraxial approximation is marginal",
                      stacklevel=3)


def default_config() -> PhysicalConfig:
    """Reference setup: 780 nm, 3 mm grating, 2 mm detector separation, nu = 0.12.

    ``alpha_mag`` is chosen so that sqrt(I0) = 2, i.e. half a photon on average
    per detector coherence area.
    """
    wavelength, width, sep = 780e-9, 3e-3, 2e-3
    sigma = 3.6e-11
    alpha = math.sqrt(2.0 * width**2 / (math.pi * sigma))
    return PhysicalConfig(
        wavelength=wavelength,
        grating_width=width,
        pixel_size=1e-5,
        coherence_area=sigma,
        alpha_mag=alpha,
        detector_separation=sep,
        propagation_distance=round(width * sep / (wavelength * 0.12), 6),
        seed=20240601,
    )


def load_config(path: str | Path) -> PhysicalConfig:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top-level JSON value must be an object")
    return PhysicalConfig.from_json_dict(doc)


def save_config(config: PhysicalConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config.to_json_dict(), indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class DerivedParams:
    n_bar: float
    k: float
    I0: float
    nu: float


def derive_params(config: PhysicalConfig) -> DerivedParams:
    validate_config(config)
    lam, L = config.wavelength, config.grating_width
    return DerivedParams(
        n_bar=math.pi * config.coherence_area / config.pixel_size**2,
        k=2 * math.pi / lam,
        I0=math.pi**2 * config.coherence_area**2 * config.alpha_mag**4 / L**4,
        nu=L * config.detector_separation / (lam * config.propagation_distance),
    )


def z_from_nu(config: PhysicalConfig, nu: float) -> float:
    """Propagation distance at which the plane label L*dX/(lambda*z) equals ``nu``."""
    if not (nu > 0 and math.isfinite(nu)):
        raise ValueError(f"nu must be finite and > 0, got {nu!r}")
    return config.grating_width * config.detector_separation / (config.wavelength * nu)


def nu_from_z(config: PhysicalConfig, z: float) -> float:
    if not z > 0:
        raise ValueError(f"z must be > 0, got {z!r}")
    return config.grating_width * config.detector_separation / (config.wavelength * z)


@dataclass(frozen=True)
class SourceModel:
    """Switches for degenerate limits used as analytic oracles.

    ``grating=False`` replaces the polarization grating by the identity
    (no loss); ``polarizations`` lists the source polarizations that are mixed
    with equal weight; ``frozen=True`` replaces the random profile by a
    deterministic uniform one (coherent-state limit).
    """

    grating: bool = True
    polarizations: tuple[str, ...] = POLARIZATIONS
    frozen: bool = False

    def __post_init__(self):
        if not self.polarizations or any(p not in POLARIZATIONS for p in self.polarizations):
            raise ValueError(f"polarizations must be a non-empty subset of {POLARIZATIONS}")
        if len(set(self.polarizations)) != len(self.polarizations):
            raise ValueError("duplicate source polarization")

    def to_dict(self) -> dict:
        return {"grating": self.grating, "polarizations": list(self.polarizations),
                "frozen": self.frozen}

    @classmethod
    def from_dict(cls, doc: dict) -> "SourceModel":
        return cls(bool(doc["grating"]), tuple(doc["polarizations"]), bool(doc["frozen"]))


@dataclass
class TransverseField:
    """One realization of the random profile Sigma(rho) on a midpoint grid.

    ``values`` has shape (ny, nx); a line field (y collapsed) has ny == 1 and
    ``line`` set, in which case its covariance is the one-dimensional kernel.
    """

    values: np.ndarray
    x: np.ndarray
    y: np.ndarray
    spacing: float
    polarization: str
    line: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def cell_area(self) -> float:
        return self.spacing if self.line else self.spacing**2

    def energy(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.cell_area)


def max_spacing(config: PhysicalConfig) -> float:
    return math.sqrt(config.coherence_area) / 2


def source_grid(config: PhysicalConfig, spacing: float | None = None) -> tuple[np.ndarray, float]:
    """Midpoint samples across [-L/2, L/2] with spacing <= sqrt(sigma)/2."""
    limit = max_spacing(config)
    if spacing is None:
        spacing = limit
    if spacing > limit * (1 + 1e-12):
        raise ValueError(
            f"grid spacing {spacing:.3e} m does not resolve the coherence cell "
            f"(need <= sqrt(sigma)/2 = {limit:.3e} m)"
        )
    L = config.grating_width
    n = int(math.ceil(L / spacing - 1e-9))
    step = L / n
    x = -L / 2 + (np.arange(n) + 0.5) * step
    return x, step


def _smoothing_kernel(sigma: float, step: float, amplitude: float) -> np.ndarray:
    # h(x) = amplitude * exp(-2 x^2 / sigma): h*h is proportional to exp(-dx^2/sigma)
    half = int(math.ceil(6 * math.sqrt(sigma) / 2 / step))
    offsets = np.arange(-half, half + 1) * step
    return amplitude * np.exp(-2 * offsets**2 / sigma)


def _complex_noise(rng: np.random.Generator, shape) -> np.ndarray:
    raw = rng.standard_normal((*shape, 2))
    return (raw[..., 0] + 1j * raw[..., 1]) / math.sqrt(2)


def thermal_line_batch(config: PhysicalConfig, rng: np.random.Generator, count: int,
                       step: float, n: int) -> np.ndarray:
    """``count`` independent y-collapsed realizations, shape (count, n).

    Covariance n_bar / sqrt(pi sigma) * exp(-dx^2 / sigma), which integrates to
    n_bar over dx.
    """
    sigma = config.coherence_area
    n_bar = math.pi * sigma / config.pixel_size**2
    kern = _smoothing_kernel(sigma, step, math.sqrt(2 * n_bar / (math.pi * sigma)))
    pad = len(kern) - 1
    noise = _complex_noise(rng, (count, n + pad))
    return math.sqrt(step) * fftconvolve(noise, kern[None, :], mode="valid", axes=-1)


def _thermal_plane(config: PhysicalConfig, rng: np.random.Generator, step: float,
                   n: int) -> np.ndarray:
    sigma = config.coherence_area
    n_bar = math.pi * sigma / config.pixel_size**2
    # separable: c^2 = 4 n_bar / (pi sigma)^2, split evenly over the two axes
    kern = _smoothing_kernel(sigma, step, math.sqrt(2 * math.sqrt(n_bar) / (math.pi * sigma)))
    pad = len(kern) - 1
    noise = _complex_noise(rng, (n + pad, n + pad))
    out = fftconvolve(noise, kern[None, :], mode="valid", axes=1)
    out = fftconvolve(out, kern[:, None], mode="valid", axes=0)
    return step * out


def sample_thermal_field(config: PhysicalConfig, polarization: str, rng_seed: int, *,
                         spacing: float | None = None, line: bool = False) -> TransverseField:
    """Draw one circular complex-Gaussian profile for source polarization ``polarization``.

    The covariance is sqrt(n(r1) n(r2)) / (pi sigma) * exp(-|r1 - r2|^2 / sigma)
    with n = pi sigma / d^2, realized by filtering white noise with a Gaussian of
    width sqrt(sigma/2). The same seed always gives the same field; use
    different seeds for H and V (see :func:`sample_unpolarized`).
    """
    if polarization not in POLARIZATIONS:
        raise ValueError(f"polarization must be one of {POLARIZATIONS}, got {polarization!r}")
    x, step = source_grid(config, spacing)
    rng = np.random.default_rng(np.random.SeedSequence(int(rng_seed)))
    if line:
        values = thermal_line_batch(config, rng, 1, step, len(x))
        y = np.zeros(1)
    else:
        values = _thermal_plane(config, rng, step, len(x))
        y = x.copy()
    return TransverseField(values=values, x=x, y=y, spacing=step, polarization=polarization,
                           line=line, meta={"seed": int(rng_seed)})


def sample_unpolarized(config: PhysicalConfig, seed_h: int, seed_v: int, **kwargs):
    """Independent H and V realizations; identical seeds would correlate them."""
    if int(seed_h) == int(seed_v):
        raise ValueError(f"seed {seed_h} reused for both polarizations; H and V must be independent")
    return (sample_thermal_field(config, "H", seed_h, **kwargs),
            sample_thermal_field(config, "V", seed_v, **kwargs))


def covariance_kernel(config: PhysicalConfig, rho1, rho2) -> np.ndarray:
    """Target <Sigma*(rho1) Sigma(rho2)> for points given as (..., 2) arrays."""
    sigma = config.coherence_area
    n_bar = math.pi * sigma / config.pixel_size**2
    d2 = np.sum((np.asarray(rho1, float) - np.asarray(rho2, float)) ** 2, axis=-1)
    return n_bar / (math.pi * sigma) * np.exp(-d2 / sigma)

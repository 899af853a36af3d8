"""Polarization grating and Fresnel free-space propagation.

Field amplitudes propagate with the kernel K (never K*):

    E(r, z) = int d^2 rho K(r, rho, z) E(rho, 0),
    K(r, rho, z) = exp(i k z) / (i lambda z) * exp(i k |r - rho|^2 / (2 z)).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import czt

from .source import TransverseField

OUTPUT_MODES = ("H", "V", "loss")
_ROW = {"H": 0, "V": 1, "loss": 2}
_COL = {"H": 0, "V": 1}


class AliasingError(ValueError):
    """Source sampling too coarse for the requested propagation geometry."""


@dataclass(frozen=True)
class GratingMatrix:
    """P(x): rows are output modes (H, V, loss), columns source polarizations (H, V)."""

    x: np.ndarray
    L: float
    matrix: np.ndarray  # shape (3, 2) + x.shape

    def entry(self, out: str, src: str) -> np.ndarray:
        return self.matrix[_ROW[out], _COL[src]]

    def column_norms(self) -> np.ndarray:
        return np.sum(self.matrix**2, axis=0)


def _phase(x, L):
    # reduce into the fundamental cell so the loss row is periodic as well
    u = np.asarray(x, dtype=float) / L
    return math.pi * (u - np.floor(u + 0.5))


def grating_matrix(x, L: float) -> GratingMatrix:
    if not L > 0:
        raise ValueError(f"grating width must be > 0, got {L!r}")
    t = _phase(x, L)
    c, s = np.cos(t), np.sin(t)
    matrix = np.array([[c * c, c * s], [c * s, s * s], [s, c]])
    return GratingMatrix(x=np.asarray(x, dtype=float), L=float(L), matrix=matrix)


def identity_matrix(x) -> GratingMatrix:
    """The no-grating limit: H and V pass unchanged, nothing is lost."""
    x = np.asarray(x, dtype=float)
    one, zero = np.ones_like(x), np.zeros_like(x)
    matrix = np.array([[one, zero], [zero, one], [zero, zero]])
    return GratingMatrix(x=x, L=math.inf, matrix=matrix)


def _check_grids(a: TransverseField, b: TransverseField):
    if a.values.shape != b.values.shape or a.spacing != b.spacing or a.line != b.line:
        raise ValueError("field grids do not match")
    if not (np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)):
        raise ValueError("field grids do not match")


def apply_grating(field_h: TransverseField, field_v: TransverseField, L: float):
    """Pointwise output_A = P_AH(x) field_H + P_AV(x) field_V for A in (H, V, loss)."""
    _check_grids(field_h, field_v)
    P = grating_matrix(field_h.x, L).matrix[:, :, None, :]  # broadcast over y rows
    outs = []
    for row, label in enumerate(OUTPUT_MODES):
        vals = P[row, 0] * field_h.values + P[row, 1] * field_v.values
        outs.append(TransverseField(values=vals, x=field_h.x, y=field_h.y,
                                    spacing=field_h.spacing, polarization=label,
                                    line=field_h.line))
    return tuple(outs)


def fresnel_kernel(r, rho, z: float, wavelength: float):
    """K(r, rho, z).

    Points are (..., 2) arrays of (x, y); scalars are taken on the x axis.
    """
    if not z > 0:
        raise ValueError(f"propagation distance must be > 0, got {z!r}")
    d2 = np.sum((_as_point(r) - _as_point(rho)) ** 2, axis=-1)
    k = 2 * math.pi / wavelength
    # split the large kz phase off before exponentiating to keep precision
    kz = math.remainder(k * z, 2 * math.pi)
    return np.exp(1j * (kz + k * d2 / (2 * z))) / (1j * wavelength * z)


def _as_point(p):
    p = np.asarray(p, dtype=float)
    if p.ndim and p.shape[-1] == 2:
        return p
    return np.stack([p, np.zeros_like(p)], axis=-1)


@dataclass
class PropagatedField:
    values: np.ndarray  # (ny, nx)
    x: np.ndarray
    y: np.ndarray
    spacing: tuple[float, float]
    polarization: str
    z: float
    captured_fraction: float = float("nan")
    meta: dict = field(default_factory=dict)

    def energy(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.spacing[0] * self.spacing[1])


def _window_axis(extent: float, n: int, center: float = 0.0):
    step = extent / n
    return center - extent / 2 + (np.arange(n) + 0.5) * step, step


def check_sampling(source_spacing: float, source_extent: float, window_extent: float,
                   z: float, wavelength: float) -> None:
    """Chirp sampling bound: spacing <= lambda z / (source extent + window extent)."""
    bound = wavelength * z / (source_extent + window_extent)
    if source_spacing > bound * (1 + 1e-12):
        raise AliasingError(
            f"source spacing {source_spacing:.3e} m exceeds the Fresnel sampling bound "
            f"{bound:.3e} m for z={z:.4g} m"
        )


def _chirp_axis(values: np.ndarray, src: np.ndarray, dst: np.ndarray, z: float,
                wavelength: float, axis: int) -> np.ndarray:
    # sum_n f_n exp(i k (x_m - s_n)^2 / 2z) on uniform grids, as a chirp-z transform:
    # (x_m - x0)(s_n - s0) = m n dx ds carries the W^(mn) term, the rest splits into
    # a pre-chirp in n and a post-chirp in m.
    k = 2 * math.pi / wavelength
    s0 = src[0]
    x0 = dst[0]
    ds = src[1] - src[0] if len(src) > 1 else 0.0
    dx = dst[1] - dst[0] if len(dst) > 1 else 0.0
    shape = [1] * values.ndim
    shape[axis] = -1
    pre = np.exp(1j * k * (src**2 - 2 * x0 * src + 2 * x0 * s0) / (2 * z))
    post = np.exp(1j * k * (dst**2 - 2 * dst * s0) / (2 * z))
    w = np.exp(-1j * k * dx * ds / z)
    out = czt(values * pre.reshape(shape), m=len(dst), w=w, a=1.0, axis=axis)
    return out * post.reshape(shape)


def propagate(field: TransverseField, z: float, wavelength: float, window: tuple,
              method: str = "czt") -> PropagatedField:
    """Fresnel-propagate a 2-D field to a detection window.

    ``window`` is ``(extent, n)`` for a square window centred on the axis, or
    ``(extent_x, n_x, extent_y, n_y)``. ``method="czt"`` evaluates the separable
    quadrature with chirp-z transforms; ``method="direct"`` sums the kernel over
    every source sample (small grids only, used as an oracle).
    """
    if field.line:
        raise ValueError("propagate() takes 2-D fields; use propagate_to_points for line fields")
    if not z > 0:
        raise ValueError(f"propagation distance must be > 0, got {z!r}")
    if len(window) == 2:
        ex, nx = window
        ey, ny = window
    else:
        ex, nx, ey, ny = window
    xo, dxo = _window_axis(ex, int(nx))
    yo, dyo = _window_axis(ey, int(ny))
    src_extent = max(np.ptp(field.x), np.ptp(field.y)) + field.spacing
    check_sampling(field.spacing, src_extent, max(ex, ey), z, wavelength)

    k = 2 * math.pi / wavelength
    pref = np.exp(1j * math.remainder(k * z, 2 * math.pi)) / (1j * wavelength * z)
    if method == "czt":
        tmp = _chirp_axis(field.values, field.x, xo, z, wavelength, axis=1)
        out = _chirp_axis(tmp, field.y, yo, z, wavelength, axis=0)
        out = pref * field.spacing**2 * out
    elif method == "direct":
        out = _direct(field, xo, yo, z, wavelength)
    else:
        raise ValueError(f"unknown propagation method {method!r}")
    result = PropagatedField(values=out, x=xo, y=yo, spacing=(dxo, dyo),
                             polarization=field.polarization, z=float(z))
    e_in = field.energy()
    result.captured_fraction = result.energy() / e_in if e_in > 0 else float("nan")
    if e_in > 0 and result.captured_fraction < 1 - 1e-6:
        warnings.warn(f"detection window captures {result.captured_fraction:.8f} of the "
                      "diffracted energy", stacklevel=2)
    return result


def _direct(field: TransverseField, xo, yo, z, wavelength):
    XS, YS = np.meshgrid(field.x, field.y)
    src = np.stack([XS.ravel(), YS.ravel()], axis=-1)
    vals = field.values.ravel()
    out = np.empty((len(yo), len(xo)), dtype=complex)
    for iy, y in enumerate(yo):
        pts = np.stack([xo, np.full_like(xo, y)], axis=-1)
        K = fresnel_kernel(pts[:, None, :], src[None, :, :], z, wavelength)
        out[iy] = K @ vals
    return out * field.spacing**2


def propagate_to_points(field: TransverseField, points, z: float, wavelength: float):
    """Field at isolated detector points by direct quadrature.

    For a line field the sum runs over the x samples on the y = 0 line, i.e. the
    x-line factor of the 2-D integral; the caller applies the transverse y factor.
    """
    pts = _as_point(points)
    src_x = field.x
    if field.line:
        src = np.stack([src_x, np.zeros_like(src_x)], axis=-1)
        vals = field.values.reshape(-1, len(src_x))
        K = fresnel_kernel(pts[:, None, :], src[None, :, :], z, wavelength)
        return (vals @ K.T).squeeze() * field.spacing
    XS, YS = np.meshgrid(field.x, field.y)
    src = np.stack([XS.ravel(), YS.ravel()], axis=-1)
    K = fresnel_kernel(pts[:, None, :], src[None, :, :], z, wavelength)
    return K @ field.values.ravel() * field.spacing**2


def dump_field(f, path: str | Path) -> tuple[Path, Path]:
    """Write ``path.bin`` (row-major little-endian float64 re/im pairs) and a JSON sidecar."""
    path = Path(path)
    vals = np.ascontiguousarray(f.values, dtype="<c16")
    bin_path = path.with_suffix(".bin")
    bin_path.write_bytes(vals.tobytes(order="C"))
    spacing = f.spacing if isinstance(f.spacing, tuple) else (f.spacing, f.spacing)
    meta = {
        "shape": list(vals.shape),
        "dtype": "complex128-le (re, im float64 pairs)",
        "order": "row-major (y, x)",
        "x_extent_m": [float(f.x[0] - spacing[0] / 2), float(f.x[-1] + spacing[0] / 2)],
        "y_extent_m": [float(f.y[0] - spacing[1] / 2), float(f.y[-1] + spacing[1] / 2)],
        "spacing_m": list(map(float, spacing)),
        "polarization": f.polarization,
    }
    if isinstance(f, PropagatedField):
        meta["z_m"] = f.z
    json_path = path.with_suffix(".json")
    json_path.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return bin_path, json_path


def load_field_values(path: str | Path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
    raw = np.frombuffer(path.with_suffix(".bin").read_bytes(), dtype="<c16")
    return raw.reshape(meta["shape"]), meta

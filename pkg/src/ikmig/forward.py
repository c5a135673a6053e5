"""Single-scattering forward model and phaseless array data.

The array records, per frequency, the squared modulus of the total field at
each receiver: direct arrival plus the weak scattered response.  Phases are
discarded at this point; everything downstream works from these power rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError, SingularityError
from .scene import Scene
from .specfun import hankel0_1

__all__ = [
    "FieldVector",
    "IntensityData",
    "direct_arrivals",
    "array_response",
    "direct_arrivals_band",
    "array_response_band",
    "total_field_band",
    "intensity_data",
    "linearization_residual",
    "write_intensity_csv",
    "read_intensity_csv",
    "write_illumination_csv",
    "read_illumination_csv",
    "write_field_csv",
    "read_field_csv",
]

_ROLES = ("g0", "p", "total", "recovered")


@dataclass(frozen=True)
class FieldVector:
    """Per-receiver complex field samples at one frequency."""

    values: np.ndarray
    role: str

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.ndim != 1 or vals.shape[0] < 1:
            raise ValueError("field values must be a nonempty 1-D array")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        if self.role not in _ROLES:
            raise ValueError(f"role must be one of {_ROLES}, got {self.role!r}")
        if self.role == "g0" and np.any(vals == 0):
            raise ValueError("direct arrivals must be nonzero at every receiver")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class IntensityData:
    """Phaseless data rows over the full band.

    ``illumination`` holds the per-frequency divisor used at recovery time:
    |fhat|^2 for deterministic illumination, 2*pi*Fhat for stochastic runs.
    """

    omegas: np.ndarray
    values: np.ndarray
    illumination: np.ndarray

    def __post_init__(self):
        om = np.asarray(self.omegas, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        ill = np.asarray(self.illumination, dtype=float)
        if om.ndim != 1 or vals.ndim != 2 or vals.shape[0] != om.shape[0]:
            raise DataFormatError("intensity values must be (F, N) matching omegas")
        if ill.shape != om.shape:
            raise DataFormatError("illumination must hold one value per frequency")
        if not (np.all(np.isfinite(om)) and np.all(np.isfinite(vals))):
            raise DataFormatError("intensity data must be finite")
        if not np.all(np.isfinite(ill)):
            raise DataFormatError("illumination must be finite")
        for arr in (om, vals, ill):
            arr.setflags(write=False)
        object.__setattr__(self, "omegas", om)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "illumination", ill)

    @property
    def n_receivers(self) -> int:
        return self.values.shape[1]


# ---------------------------------------------------------------------------
# vectorized Green's function helpers
# ---------------------------------------------------------------------------


def _distances(points: np.ndarray, ref: np.ndarray) -> np.ndarray:
    return np.linalg.norm(points - ref, axis=-1)


def _green_from_distance(r: np.ndarray, k: float, dimension: int) -> np.ndarray:
    """Green's function values for an array of separations."""
    if dimension == 3:
        return np.exp(1j * k * r) / (4.0 * math.pi * r)
    flat = np.asarray(r, dtype=float).reshape(-1)
    out = np.empty(flat.shape, dtype=complex)
    for i, t in enumerate(flat):
        out[i] = 0.25j * hankel0_1(k * t)
    return out.reshape(np.shape(r))


def direct_arrivals(scene: Scene, omega: float) -> FieldVector:
    """Direct source-to-receiver field g0 at one frequency."""
    if not omega > 0.0:
        raise ValueError("omega must be positive")
    k = omega / scene.c0
    r = _distances(scene.receivers, scene.source)
    hit = np.flatnonzero(r == 0.0)
    if hit.size:
        raise SingularityError(f"source coincides with receiver {hit[0]}")
    return FieldVector(_green_from_distance(r, k, scene.dimension), "g0")


def array_response(scene: Scene, omega: float) -> FieldVector:
    """Scattered field p at the receivers, first Born term, one frequency."""
    if not omega > 0.0:
        raise ValueError("omega must be positive")
    k = omega / scene.c0
    n = scene.n_receivers
    if not scene.scatterers:
        return FieldVector(np.zeros(n, dtype=complex), "p")
    positions = np.asarray([s.position for s in scene.scatterers])
    rho = np.asarray([s.rho for s in scene.scatterers])

    r_rs = _distances(scene.receivers[:, None, :], positions[None, :, :])
    r_ss = _distances(positions, scene.source)
    bad = np.argwhere(r_rs == 0.0)
    if bad.size:
        r_i, s_i = bad[0]
        raise SingularityError(f"scatterer {s_i} coincides with receiver {r_i}")
    bad = np.flatnonzero(r_ss == 0.0)
    if bad.size:
        raise SingularityError(f"scatterer {bad[0]} coincides with the source")

    g_recv = _green_from_distance(r_rs, k, scene.dimension)
    g_src = _green_from_distance(r_ss, k, scene.dimension)
    p = (k * k) * (g_recv * (rho * g_src)[None, :]).sum(axis=1)
    return FieldVector(p, "p")


def direct_arrivals_band(scene: Scene) -> np.ndarray:
    """Stacked g0 rows, shape (F, N), ascending frequency."""
    return np.stack([direct_arrivals(scene, w).values for w in scene.band.omegas])


def array_response_band(scene: Scene) -> np.ndarray:
    """Stacked p rows, shape (F, N), ascending frequency."""
    return np.stack([array_response(scene, w).values for w in scene.band.omegas])


def total_field_band(scene: Scene) -> np.ndarray:
    """Stacked g0 + p rows, shape (F, N), ascending frequency."""
    return direct_arrivals_band(scene) + array_response_band(scene)


# ---------------------------------------------------------------------------
# phaseless data
# ---------------------------------------------------------------------------


def intensity_data(scene: Scene, fhat_sq=None) -> IntensityData:
    """Exact quadratic power data over the band.

    Parameters
    ----------
    fhat_sq : array_like of shape (F,), optional
        Per-frequency illumination power |fhat|^2; defaults to 1.

    Returns
    -------
    IntensityData
        Rows |fhat|^2 |g0 + p|^2; no linearization is applied.
    """
    omegas = scene.band.omegas
    if fhat_sq is None:
        fhat_sq = np.ones(omegas.shape[0])
    fhat_sq = np.asarray(fhat_sq, dtype=float)
    if fhat_sq.shape != omegas.shape:
        raise DataFormatError("fhat_sq must hold one value per frequency")
    if np.any(fhat_sq <= 0.0):
        raise DataFormatError("illumination power must be positive")
    total = direct_arrivals_band(scene) + array_response_band(scene)
    power = (np.conj(total) * total).real
    return IntensityData(omegas, fhat_sq[:, None] * power, fhat_sq)


def linearization_residual(scene: Scene, omega: float) -> float:
    """max_r |p_r| / |g0_r|, the size of the neglected quadratic term."""
    g0 = direct_arrivals(scene, omega).values
    p = array_response(scene, omega).values
    return float(np.max(np.abs(p) / np.abs(g0)))


# ---------------------------------------------------------------------------
# CSV interface
# ---------------------------------------------------------------------------

_INTENSITY_HEADER = "freq_index,omega_rad_s,receiver_index,value"
_ILLUMINATION_HEADER = "freq_index,omega_rad_s,twopi_Fhat"


def _fmt(x: float) -> str:
    return format(x, ".17g")


def write_intensity_csv(data: IntensityData, path) -> None:
    """Rows sorted by (freq_index, receiver_index), 17 significant digits."""
    lines = [_INTENSITY_HEADER]
    for i, omega in enumerate(data.omegas):
        w = _fmt(omega)
        for r in range(data.n_receivers):
            lines.append(f"{i},{w},{r},{_fmt(data.values[i, r])}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_illumination_csv(data: IntensityData, path) -> None:
    lines = [_ILLUMINATION_HEADER]
    for i, omega in enumerate(data.omegas):
        lines.append(f"{i},{_fmt(omega)},{_fmt(data.illumination[i])}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_intensity_csv(path, illumination_path=None) -> IntensityData:
    """Inverse of the writers; checks grid completeness and ordering."""
    with open(path) as fh:
        header = fh.readline().strip()
        if header != _INTENSITY_HEADER:
            raise DataFormatError(f"unexpected intensity header {header!r}")
        freq, om, recv, val = [], [], [], []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise DataFormatError(f"malformed intensity row {line!r}")
            freq.append(int(parts[0]))
            om.append(float(parts[1]))
            recv.append(int(parts[2]))
            val.append(float(parts[3]))
    if not freq:
        raise DataFormatError("intensity file holds no rows")
    n_freq = max(freq) + 1
    n_recv = max(recv) + 1
    if len(freq) != n_freq * n_recv:
        raise DataFormatError("intensity rows do not fill the (F, N) grid")
    omegas = np.full(n_freq, np.nan)
    values = np.full((n_freq, n_recv), np.nan)
    expect = 0
    for f, w, r, v in zip(freq, om, recv, val):
        if f != expect // n_recv or r != expect % n_recv:
            raise DataFormatError("intensity rows out of order")
        expect += 1
        omegas[f] = w
        values[f, r] = v

    if illumination_path is None:
        illum = np.ones(n_freq)
    else:
        illum = _read_illumination(illumination_path, omegas)
    return IntensityData(omegas, values, illum)


def _read_illumination(path, omegas) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != _ILLUMINATION_HEADER:
            raise DataFormatError(f"unexpected illumination header {header!r}")
        illum = np.full(omegas.shape[0], np.nan)
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise DataFormatError(f"malformed illumination row {line!r}")
            i = int(parts[0])
            if not 0 <= i < omegas.shape[0]:
                raise DataFormatError(f"illumination row {i} outside the grid")
            if float(parts[1]) != omegas[i]:
                raise DataFormatError(f"illumination omega mismatch at row {i}")
            illum[i] = float(parts[2])
    if np.any(np.isnan(illum)):
        raise DataFormatError("illumination file misses frequencies")
    return illum


def read_illumination_csv(path, omegas) -> np.ndarray:
    return _read_illumination(path, np.asarray(omegas, dtype=float))


_FIELD_HEADER = "freq_index,omega_rad_s,receiver_index,re,im"


def write_field_csv(omegas, values, path) -> None:
    """Per-frequency complex receiver fields, same ordering as intensity."""
    values = np.asarray(values, dtype=complex)
    lines = [_FIELD_HEADER]
    for i, omega in enumerate(np.asarray(omegas, dtype=float)):
        w = _fmt(omega)
        for r in range(values.shape[1]):
            v = values[i, r]
            lines.append(f"{i},{w},{r},{_fmt(v.real)},{_fmt(v.imag)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_field_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of write_field_csv; returns (omegas, values (F, N))."""
    with open(path) as fh:
        header = fh.readline().strip()
        if header != _FIELD_HEADER:
            raise DataFormatError(f"unexpected field header {header!r}")
        rows = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise DataFormatError(f"malformed field row {line!r}")
            rows.append(parts)
    if not rows:
        raise DataFormatError("field file holds no rows")
    n_freq = max(int(r[0]) for r in rows) + 1
    n_recv = max(int(r[2]) for r in rows) + 1
    if len(rows) != n_freq * n_recv:
        raise DataFormatError("field rows do not fill the (F, N) grid")
    omegas = np.full(n_freq, np.nan)
    values = np.empty((n_freq, n_recv), dtype=complex)
    for expect, parts in enumerate(rows):
        f, r = int(parts[0]), int(parts[2])
        if f != expect // n_recv or r != expect % n_recv:
            raise DataFormatError("field rows out of order")
        omegas[f] = float(parts[1])
        values[f, r] = complex(float(parts[3]), float(parts[4]))
    return omegas, values

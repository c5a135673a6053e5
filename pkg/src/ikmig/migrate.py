"""Kirchhoff migration of per-frequency receiver fields onto an image grid.

A single-frequency image backpropagates the field by conjugated travel-time
kernels from every receiver and from the source; the broadband image is the
uniform-weight frequency sum over the scene band.  Cells that collide with
a receiver or the source are flagged NaN and excluded from metrics.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataFormatError
from .forward import FieldVector, array_response_band, direct_arrivals_band
from .recover import check_geometric_condition
from .scene import ImageWindowSpec, Scene, scene_digest
from .specfun import hankel0_1

__all__ = [
    "ImageGrid",
    "ImageMetrics",
    "SpuriousReport",
    "migrate_single",
    "migrate_broadband",
    "migrate_broadband_stack",
    "spurious_term_image",
    "image_metrics",
    "magnitude_correlation",
    "export_image",
    "write_image_csv",
    "write_image_pgm",
    "read_image_csv",
]

# Cells closer to a receiver/source than this fraction of the cell spacing
# are treated as collisions.
_COLLISION_FRACTION = 1e-9


@dataclass(frozen=True)
class ImageGrid:
    """Complex image on a square window grid, plus provenance metadata."""

    window: ImageWindowSpec
    values: np.ndarray
    omegas: np.ndarray
    n_receivers: int
    scene_sha256: str

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        n = self.window.cells_per_side
        if vals.shape != (n, n):
            raise DataFormatError("image shape must match the window grid")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


def _field_values(field, n: int) -> np.ndarray:
    vals = field.values if isinstance(field, FieldVector) else np.asarray(field, dtype=complex)
    if vals.shape != (n,):
        raise DataFormatError("field length must equal the receiver count")
    return vals


def _geometry(scene: Scene, window: ImageWindowSpec):
    """Distances from each cell to the receivers and to the source."""
    pos = window.cell_positions()
    n = window.cells_per_side
    if pos.shape[2] != scene.coords:
        raise DataFormatError("window coordinate length must match the scene")
    cells = pos.reshape(n * n, -1)
    d_recv = np.linalg.norm(cells[:, None, :] - scene.receivers[None, :, :], axis=2)
    d_src = np.linalg.norm(cells - scene.source[None, :], axis=1)
    eps = _COLLISION_FRACTION * window.spacing
    mask = (d_recv < eps).any(axis=1) | (d_src < eps)
    if mask.any():
        d_recv = d_recv.copy()
        d_src = d_src.copy()
        d_recv[mask, :] = 1.0
        d_src[mask] = 1.0
    return d_recv, d_src, mask


def _apply_kernel(d_recv, d_src, mask, k: float, dimension: int, stack: np.ndarray):
    """Migrate a (N, S) stack of fields at wavenumber k; returns (cells, S)."""
    if dimension == 3:
        kernel = np.exp(-1j * k * (d_recv + d_src[:, None]))
        kernel /= (16.0 * math.pi * math.pi) * d_recv * d_src[:, None]
    else:
        g_recv = np.empty(d_recv.shape, dtype=complex)
        flat = d_recv.reshape(-1)
        out = g_recv.reshape(-1)
        for i, r in enumerate(flat):
            out[i] = 0.25j * hankel0_1(k * r)
        g_src = np.array([0.25j * hankel0_1(k * r) for r in d_src])
        kernel = np.conj(g_recv) * np.conj(g_src)[:, None]
    image = kernel @ stack
    image[mask, :] = complex(np.nan, np.nan)
    return image


def migrate_single(scene: Scene, field, omega: float, window: ImageWindowSpec | None = None) -> ImageGrid:
    """Image of one per-frequency field at one angular frequency."""
    if not omega > 0.0:
        raise ValueError("omega must be positive")
    window = window or scene.window
    vals = _field_values(field, scene.n_receivers)
    d_recv, d_src, mask = _geometry(scene, window)
    img = _apply_kernel(d_recv, d_src, mask, omega / scene.c0, scene.dimension, vals[:, None])
    n = window.cells_per_side
    return ImageGrid(window, img[:, 0].reshape(n, n), np.asarray([omega]),
                     scene.n_receivers, scene_digest(scene))


def migrate_broadband_stack(
    scene: Scene,
    stack: np.ndarray,
    window: ImageWindowSpec | None = None,
    threads: int = 1,
) -> list[ImageGrid]:
    """Broadband images of several field sets sharing one kernel pass.

    Parameters
    ----------
    stack : complex array (F, N, S)
        S field sets sampled on the scene band.

    Returns
    -------
    list of ImageGrid, one per field set.

    Notes
    -----
    Frequencies are processed independently (optionally in a thread pool)
    and accumulated in ascending order, so results do not depend on the
    thread count.
    """
    window = window or scene.window
    omegas = scene.band.omegas
    stack = np.asarray(stack, dtype=complex)
    if stack.ndim != 3 or stack.shape[:2] != (omegas.shape[0], scene.n_receivers):
        raise DataFormatError("stack must have shape (F, N, S) on the scene band")
    d_recv, d_src, mask = _geometry(scene, window)
    c0, dim = scene.c0, scene.dimension

    def one(i: int) -> np.ndarray:
        return _apply_kernel(d_recv, d_src, mask, omegas[i] / c0, dim, stack[i])

    indices = range(omegas.shape[0])
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = list(pool.map(one, indices))
    else:
        partials = [one(i) for i in indices]
    total = partials[0].copy()
    for part in partials[1:]:
        total += part
    total *= scene.band.delta_omega

    n = window.cells_per_side
    digest = scene_digest(scene)
    return [
        ImageGrid(window, total[:, s].reshape(n, n), omegas, scene.n_receivers, digest)
        for s in range(stack.shape[2])
    ]


def migrate_broadband(
    scene: Scene,
    fields: Sequence,
    window: ImageWindowSpec | None = None,
    threads: int = 1,
) -> ImageGrid:
    """Uniform-weight frequency sum of single-frequency migrations.

    ``fields`` holds one per-receiver field per band frequency, ascending.
    A single-sample band degenerates to unit weight, i.e. the plain
    single-frequency image.
    """
    omegas = scene.band.omegas
    if len(fields) != omegas.shape[0]:
        raise DataFormatError("need exactly one field per band frequency")
    n = scene.n_receivers
    stack = np.stack([_field_values(f, n) for f in fields])[:, :, None]
    return migrate_broadband_stack(scene, stack, window, threads)[0]


# ---------------------------------------------------------------------------
# spurious-term diagnostic
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpuriousReport:
    """Size of the migrated conjugate-mirror term relative to the signal."""

    ratio: float
    degenerate: bool
    geometry_ok: bool


def spurious_term_image(
    scene: Scene, window: ImageWindowSpec | None = None, threads: int = 1
) -> tuple[ImageGrid, SpuriousReport]:
    """Migrate the mirror term (conj(g0))^-1 g0 conj(p) over the band.

    Returns the mirror image and a report with the peak-magnitude ratio
    against the migrated true response.  The geometric visibility check
    runs first; a failing check is reported, not raised.
    """
    geometry = check_geometric_condition(scene, window)
    g0 = direct_arrivals_band(scene)
    p = array_response_band(scene)
    if not np.any(p):
        spur = np.zeros_like(p)
        degenerate = True
    else:
        spur = g0 / np.conj(g0) * np.conj(p)
        degenerate = False
    stack = np.stack([p, spur], axis=2)
    image_p, image_s = migrate_broadband_stack(scene, stack, window, threads)
    peak_p = float(np.nanmax(np.abs(image_p.values)))
    peak_s = float(np.nanmax(np.abs(image_s.values)))
    ratio = 0.0 if degenerate else peak_s / peak_p
    return image_s, SpuriousReport(ratio, degenerate, geometry.ok)


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ImageMetrics:
    peak_cell: tuple[int, int]
    peak_position: tuple[float, ...]
    peak_value: float
    range_axis: int
    range_fwhm_m: float
    crossrange_fwhm_m: float
    rayleigh_estimate_m: float
    range_estimate_m: float
    correlation: float | None
    flags: tuple[str, ...]


def magnitude_correlation(a: ImageGrid, b: ImageGrid) -> float:
    """Normalized inner product of magnitude layers over co-valid cells."""
    ma, mb = np.abs(a.values), np.abs(b.values)
    if ma.shape != mb.shape:
        raise DataFormatError("images must share a grid")
    valid = ~(np.isnan(ma) | np.isnan(mb))
    ma, mb = ma[valid], mb[valid]
    na, nb = np.linalg.norm(ma), np.linalg.norm(mb)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float((ma * mb).sum() / (na * nb))


def _fwhm_profile(profile: np.ndarray, peak: int, spacing: float):
    """Full width at half maximum along one grid line, by linear interpolation.

    Returns (width_m, clipped) where clipped means a half-maximum crossing
    was not bracketed inside the grid (or hit a masked cell).
    """
    top = profile[peak]
    half = 0.5 * top
    edges = []
    for step in (-1, 1):
        i = peak
        while True:
            j = i + step
            if j < 0 or j >= profile.shape[0] or np.isnan(profile[j]):
                return math.nan, True
            if profile[j] <= half:
                frac = (profile[i] - half) / (profile[i] - profile[j])
                edges.append(i + step * frac)
                break
            i = j
    return (edges[1] - edges[0]) * spacing, False


def image_metrics(image: ImageGrid, scene: Scene, reference: ImageGrid | None = None) -> ImageMetrics:
    """Peak location, widths, resolution estimates, optional correlation."""
    mag = image.magnitude
    flags = []
    valid = ~np.isnan(mag)
    if not valid.any() or np.nanmax(mag) == 0.0:
        flags.append("degenerate_zero_image")
        peak_idx = (0, 0)
        peak_val = 0.0
    else:
        flat = np.nanargmax(mag)
        peak_idx = np.unravel_index(flat, mag.shape)
        peak_val = float(mag[peak_idx])

    window = image.window
    he = window.half_extent
    cell = (int(peak_idx[0]) - he, int(peak_idx[1]) - he)
    center = np.asarray(window.center)
    position = center.copy()
    position[0] += cell[0] * window.spacing
    position[1] += cell[1] * window.spacing

    direction = np.asarray(window.center)[:2] - scene.array_center[:2]
    range_axis = 0 if abs(direction[0]) >= abs(direction[1]) else 1

    if "degenerate_zero_image" in flags:
        fwhm = {0: math.nan, 1: math.nan}
        flags.extend(["range_fwhm_clipped", "crossrange_fwhm_clipped"])
    else:
        fwhm = {}
        for axis in (0, 1):
            profile = mag[:, peak_idx[1]] if axis == 0 else mag[peak_idx[0], :]
            width, clipped = _fwhm_profile(profile, int(peak_idx[axis]), window.spacing)
            fwhm[axis] = width
            if clipped:
                name = "range" if axis == range_axis else "crossrange"
                flags.append(f"{name}_fwhm_clipped")

    band = scene.band
    bandwidth_hz = band.f_max_hz - band.f_min_hz
    range_estimate = math.inf if bandwidth_hz == 0.0 else scene.c0 / bandwidth_hz
    rayleigh = scene.lambda0 * scene.standoff / scene.aperture

    correlation = None
    if reference is not None:
        correlation = magnitude_correlation(image, reference)

    return ImageMetrics(
        peak_cell=cell,
        peak_position=tuple(position.tolist()),
        peak_value=peak_val,
        range_axis=range_axis,
        range_fwhm_m=fwhm[range_axis],
        crossrange_fwhm_m=fwhm[1 - range_axis],
        rayleigh_estimate_m=rayleigh,
        range_estimate_m=range_estimate,
        correlation=correlation,
        flags=tuple(flags),
    )


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------

_IMAGE_HEADER = "ix,iy,x_m,y_m,re,im,abs"


def _fmt(x: float) -> str:
    return format(x, ".17g")


def write_image_csv(image: ImageGrid, path) -> None:
    """Row-major cell dump (first index slow) with 17 significant digits."""
    he = image.window.half_extent
    center = image.window.center
    spacing = image.window.spacing
    lines = [_IMAGE_HEADER]
    for i in range(image.window.cells_per_side):
        ix = i - he
        x = center[0] + ix * spacing
        for j in range(image.window.cells_per_side):
            iy = j - he
            y = center[1] + iy * spacing
            v = image.values[i, j]
            lines.append(
                f"{ix},{iy},{_fmt(x)},{_fmt(y)},{_fmt(v.real)},{_fmt(v.imag)},{_fmt(abs(v))}"
            )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_image_csv(path) -> dict:
    """Read back a CSV image dump; returns cell indices and value arrays."""
    with open(path) as fh:
        header = fh.readline().strip()
        if header != _IMAGE_HEADER:
            raise DataFormatError(f"unexpected image header {header!r}")
        rows = []
        for line in fh:
            line = line.strip()
            if line:
                rows.append(line.split(","))
    if not rows:
        raise DataFormatError("image file holds no rows")
    ix = np.array([int(r[0]) for r in rows])
    iy = np.array([int(r[1]) for r in rows])
    he = ix.max()
    n = 2 * he + 1
    if len(rows) != n * n or ix.min() != -he:
        raise DataFormatError("image rows do not fill a square grid")
    values = np.empty((n, n), dtype=complex)
    xs = np.empty((n, n))
    ys = np.empty((n, n))
    for r, (i, j) in zip(rows, zip(ix, iy)):
        values[i + he, j + he] = complex(float(r[4]), float(r[5]))
        xs[i + he, j + he] = float(r[2])
        ys[i + he, j + he] = float(r[3])
    return {"values": values, "x_m": xs, "y_m": ys, "half_extent": int(he)}


def write_image_pgm(image: ImageGrid, path) -> None:
    """8-bit ASCII PGM preview of the magnitude layer.

    Min-max normalized; a flat image maps to 255 when nonzero, else 0.
    Masked cells render as 0.  The top pixel row is the maximum second
    (cross-range) coordinate.
    """
    mag = image.magnitude
    finite = np.nan_to_num(mag, nan=0.0)
    valid = ~np.isnan(mag)
    lo = float(finite[valid].min()) if valid.any() else 0.0
    hi = float(finite[valid].max()) if valid.any() else 0.0
    n = image.window.cells_per_side
    if hi > lo:
        scaled = np.clip((finite - lo) / (hi - lo) * 255.0, 0.0, 255.0)
        pixels = np.rint(scaled).astype(int)
    elif hi > 0.0:
        pixels = np.full(mag.shape, 255, dtype=int)
    else:
        pixels = np.zeros(mag.shape, dtype=int)
    pixels[~valid] = 0
    lines = ["P2", f"{n} {n}", "255"]
    for j in range(n - 1, -1, -1):
        lines.append(" ".join(str(int(pixels[i, j])) for i in range(n)))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def export_image(image: ImageGrid, path) -> None:
    """Write CSV or PGM depending on the path suffix."""
    text = str(path)
    if text.endswith(".csv"):
        write_image_csv(image, path)
    elif text.endswith(".pgm"):
        write_image_pgm(image, path)
    else:
        raise DataFormatError(f"unsupported image suffix in {text!r}")

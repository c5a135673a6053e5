"""Random-source illumination and power-spectrum data synthesis.

The source is a stationary mean-zero Gaussian process with a Gaussian
power spectrum centered on the band.  Frequency samples of its transform
are independent complex Gaussians whose second moment is 2 pi times the
power spectrum, so power-spectrum data can be synthesized directly per
frequency without time-domain simulation.  A time-domain oracle is kept
for validating that empirical autocorrelation spectra converge to their
ensemble limit as the acquisition window grows; it is meant for
scaled-down (acoustic-like) parameters only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError
from .forward import IntensityData, array_response, direct_arrivals, total_field_band
from .scene import FrequencyGrid, Scene

__all__ = [
    "PowerSpectrum",
    "StochasticDraw",
    "sample_illumination",
    "sample_noise",
    "clean_power_data",
    "noisy_power_data",
    "time_domain_autocorr_oracle",
]

_TAG_ILLUMINATION = 1
_TAG_NOISE = 2
_TAG_ORACLE = 3


def _substream(seed: int, tag: int, a: int = 0, b: int = 0) -> np.random.Generator:
    """Counter-based generator for one (tag, a, b) substream of a seed.

    Streams are independent of evaluation order, so sampling may be
    parallelized without changing results.
    """
    if not 0 <= seed < 2**64:
        raise ValueError("seed must lie in [0, 2**64)")
    if not (0 <= a < 2**28 and 0 <= b < 2**28):
        raise ValueError("substream index out of range")
    key = np.array([seed, (tag << 56) | (a << 28) | b], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class PowerSpectrum:
    """Gaussian power spectrum t_c * exp(-(omega-omega0)^2 t_c^2 / 4 pi)."""

    omega0: float
    t_c: float

    def __post_init__(self):
        if not (math.isfinite(self.omega0) and self.omega0 > 0.0):
            raise ValueError("omega0 must be positive and finite")
        if not (math.isfinite(self.t_c) and self.t_c > 0.0):
            raise ValueError("t_c must be positive and finite")

    def value(self, omega):
        omega = np.asarray(omega, dtype=float)
        arg = (omega - self.omega0) * self.t_c
        return self.t_c * np.exp(-arg * arg / (4.0 * math.pi))

    def autocorrelation(self, tau):
        """Inverse transform: exp(-i omega0 tau) exp(-pi tau^2 / t_c^2)."""
        tau = np.asarray(tau, dtype=float)
        return np.exp(-1j * self.omega0 * tau - math.pi * (tau / self.t_c) ** 2)

    @classmethod
    def for_band(cls, band: FrequencyGrid, attenuation: float = 1e-3) -> "PowerSpectrum":
        """Spectrum centered on the band, decayed to `attenuation * t_c`
        at both band edges."""
        if not 0.0 < attenuation < 1.0:
            raise ValueError("attenuation must lie in (0, 1)")
        omegas = band.omegas
        omega0 = 0.5 * (omegas[0] + omegas[-1])
        half = 0.5 * (omegas[-1] - omegas[0])
        if half <= 0.0:
            raise ValueError("band must span a positive width")
        t_c = math.sqrt(4.0 * math.pi * math.log(1.0 / attenuation)) / half
        return cls(omega0, t_c)


@dataclass(frozen=True)
class StochasticDraw:
    """One seeded realization of the source transform on a frequency grid."""

    seed: int
    spectrum: PowerSpectrum
    omegas: np.ndarray
    fhat: np.ndarray
    noise: np.ndarray | None = None

    def __post_init__(self):
        omegas = np.asarray(self.omegas, dtype=float)
        fhat = np.asarray(self.fhat, dtype=complex)
        if fhat.shape != omegas.shape:
            raise ValueError("one sample per grid frequency required")
        omegas.setflags(write=False)
        fhat.setflags(write=False)
        object.__setattr__(self, "omegas", omegas)
        object.__setattr__(self, "fhat", fhat)


def sample_illumination(spectrum: PowerSpectrum, grid: FrequencyGrid, seed: int) -> StochasticDraw:
    """Independent complex Gaussian samples with E|fhat|^2 = 2 pi Fhat.

    Each frequency draws from its own counter-based substream, so a
    sample depends only on (seed, frequency index).
    """
    omegas = grid.omegas
    scale = np.sqrt(math.pi * spectrum.value(omegas))
    fhat = np.empty(omegas.shape[0], dtype=complex)
    for i in range(omegas.shape[0]):
        z = _substream(seed, _TAG_ILLUMINATION, i).standard_normal(2)
        fhat[i] = scale[i] * complex(z[0], z[1])
    return StochasticDraw(seed, spectrum, omegas, fhat)


def sample_noise(spectrum: PowerSpectrum, grid: FrequencyGrid, n_receivers: int, seed: int) -> np.ndarray:
    """Unscaled noise transforms, one substream per (receiver, frequency).

    Returns an (N, F) array of independent complex Gaussians with
    E|eta|^2 = 2 pi Fhat, i.e. the same spectral shape as the source.
    """
    omegas = grid.omegas
    scale = np.sqrt(math.pi * spectrum.value(omegas))
    out = np.empty((n_receivers, omegas.shape[0]), dtype=complex)
    for r in range(n_receivers):
        for i in range(omegas.shape[0]):
            z = _substream(seed, _TAG_NOISE, r, i).standard_normal(2)
            out[r, i] = scale[i] * complex(z[0], z[1])
    return out


def _check_draw(scene: Scene, draw: StochasticDraw) -> None:
    if draw.omegas.shape != scene.band.omegas.shape or not np.array_equal(
        draw.omegas, scene.band.omegas
    ):
        raise ValueError("draw was sampled on a different frequency grid")


def _signal_rows(scene: Scene, draw: StochasticDraw) -> np.ndarray:
    """(F, N) illuminated total field (g0 + p) fhat at the receivers."""
    return total_field_band(scene) * draw.fhat[:, None]


def _power_data(scene: Scene, draw: StochasticDraw, rows: np.ndarray) -> IntensityData:
    illumination = 2.0 * math.pi * draw.spectrum.value(draw.omegas)
    return IntensityData(draw.omegas, np.abs(rows) ** 2, illumination)


def clean_power_data(scene: Scene, draw: StochasticDraw) -> IntensityData:
    """Noise-free power-spectrum rows |(g0 + p) fhat|^2.

    The illumination record stores the ensemble value 2 pi Fhat, not the
    realized |fhat|^2: that is all a receiver could know.
    """
    _check_draw(scene, draw)
    return _power_data(scene, draw, _signal_rows(scene, draw))


def noisy_power_data(
    scene: Scene, draw: StochasticDraw, noise_fraction: float, seed: int
) -> IntensityData:
    """Power-spectrum rows with additive measurement noise.

    The noise keeps the source spectral shape and is rescaled per
    receiver so that its realized total power is exactly
    ``noise_fraction`` times the realized signal power there.
    """
    if not (math.isfinite(noise_fraction) and noise_fraction >= 0.0):
        raise ValueError("noise_fraction must be a nonnegative number")
    _check_draw(scene, draw)
    signal = _signal_rows(scene, draw)
    raw = draw.noise
    if raw is None:
        raw = sample_noise(draw.spectrum, scene.band, scene.n_receivers, seed)
    elif raw.shape != (scene.n_receivers, draw.omegas.shape[0]):
        raise ValueError("draw noise shape does not match scene")
    sig_power = (np.abs(signal) ** 2).sum(axis=0)
    raw_power = (np.abs(raw) ** 2).sum(axis=1)
    bad = np.nonzero(sig_power == 0.0)[0]
    if bad.size:
        raise NumericError(f"zero signal power at receiver {bad[0]}: cannot scale noise")
    scale = np.sqrt(noise_fraction * sig_power / raw_power)
    rows = signal + (scale[:, None] * raw).T
    return _power_data(scene, draw, rows)


# ---------------------------------------------------------------------------
# time-domain validation oracle
# ---------------------------------------------------------------------------


def _transfer_band(scene: Scene, omegas: np.ndarray) -> np.ndarray:
    """(N, K) total receiver transfer g0 + p at arbitrary frequencies."""
    n = scene.n_receivers
    out = np.empty((n, omegas.shape[0]), dtype=complex)
    for j, w in enumerate(omegas):
        out[:, j] = direct_arrivals(scene, w).values + array_response(scene, w).values
    return out


def time_domain_autocorr_oracle(
    scene: Scene,
    spectrum: PowerSpectrum,
    T: float,
    dt: float,
    seed: int,
    lag_factor: float = 4.0,
) -> np.ndarray:
    """Spectrum of the empirical trace autocorrelation, per receiver.

    Synthesizes receiver traces of duration 2T by circular inverse
    transform of (g0 + p) fhat on a fine grid, autocorrelates them, and
    transforms lags |tau| <= lag_factor * t_c back to the scene band
    frequencies under a triangular lag window.  Ensemble limit:
    Fhat |g0 + p|^2.  Intended for acoustic-scale scenes; cost grows
    linearly with T / dt.

    Returns an (N, F) complex array on the scene band.
    """
    omega_max = scene.band.omegas[-1]
    if not dt * omega_max <= math.pi:
        raise ValueError("time step undersamples the band: aliasing")
    if not T >= 10.0 * spectrum.t_c:
        raise ValueError("acquisition time too short against the correlation time")
    period = 2.0 * T
    m = int(round(period / dt))
    period = m * dt
    k = np.arange(1, m // 2)
    omega_k = 2.0 * math.pi * k / period
    fhat_sq = spectrum.value(omega_k)
    active = np.nonzero(fhat_sq > 1e-12 * spectrum.t_c)[0]
    if active.size == 0:
        raise ValueError("grid resolves no energy of the spectrum")
    k = k[active]
    omega_k = omega_k[active]

    rng = _substream(seed, _TAG_ORACLE)
    z = rng.standard_normal((k.shape[0], 2))
    coeff = np.sqrt(fhat_sq[active] / (2.0 * period)) * (z[:, 0] + 1j * z[:, 1])

    transfer = _transfer_band(scene, omega_k)
    spec = np.zeros((scene.n_receivers, m), dtype=complex)
    spec[:, k] = transfer * coeff[None, :]
    traces = np.fft.fft(spec, axis=1)

    # circular autocorrelation: psi_m = (1/M) sum_j conj(u_j) u_{j+m}
    psi = np.fft.ifft(np.abs(np.fft.fft(traces, axis=1)) ** 2, axis=1) / m

    lag_max = lag_factor * spectrum.t_c
    lags = min(int(lag_max / dt), m // 2 - 1)
    idx = np.arange(-lags, lags + 1)
    window = 1.0 - np.abs(idx) / (lags + 1.0)
    tau = idx * dt
    kernel = window[:, None] * np.exp(1j * np.outer(tau, scene.band.omegas))
    return dt * (psi[:, idx % m] @ kernel)

"""Forward/inverse STFT and magnitude extraction.

Analysis uses a periodic Hann window with reflect-mode center padding;
synthesis is weighted overlap-add with per-sample squared-window
normalization, which reconstructs exactly wherever the squared-window
overlap sum is bounded away from zero.

Transforms run in 64-bit floats throughout. The default analysis grid is
4096/2048 (window/hop).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .audio_io import Waveform
from .errors import EmptyInputError, NonInvertibleError, ShapeError

COLA_FLOOR = 1e-8


@lru_cache(maxsize=32)
def _window(name: str, n_fft: int) -> np.ndarray:
    if name != "hann":
        raise ShapeError(f"unknown window {name!r}")
    # Periodic Hann: COLA-compliant at 50% overlap.
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(n_fft) / n_fft))


@dataclass(frozen=True)
class StftParams:
    n_fft: int = 4096
    hop: int = 2048
    window: str = "hann"
    center: bool = True

    def __post_init__(self):
        if self.n_fft <= 0 or self.n_fft % 2:
            raise ShapeError(f"n_fft must be positive and even, got {self.n_fft}")
        if not (0 < self.hop <= self.n_fft):
            raise ShapeError(f"need 0 < hop <= n_fft, got hop={self.hop}")
        _window(self.window, self.n_fft)

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1

    def window_array(self) -> np.ndarray:
        return _window(self.window, self.n_fft)


@dataclass(frozen=True)
class ComplexSpectrogram:
    """One-sided complex spectrogram: bins has shape (F, T_s), complex128."""

    bins: np.ndarray
    params: StftParams = field(default_factory=StftParams)

    def __post_init__(self):
        arr = np.asarray(self.bins, dtype=np.complex128)
        if arr.ndim != 2:
            raise ShapeError(f"spectrogram must be 2-D, got ndim={arr.ndim}")
        if arr.shape[0] != self.params.n_bins:
            raise ShapeError(
                f"expected F={self.params.n_bins} bins, got {arr.shape[0]}"
            )
        if arr.size and not np.all(np.isfinite(arr)):
            raise ShapeError("spectrogram contains non-finite entries")
        object.__setattr__(self, "bins", arr)

    @property
    def n_frames(self) -> int:
        return self.bins.shape[1]

    def as_real(self) -> np.ndarray:
        """(F, T_s, 2) view with real and imaginary parts split out."""
        return np.stack([self.bins.real, self.bins.imag], axis=-1)


def stft(wave: Waveform, params: StftParams | None = None) -> ComplexSpectrogram:
    """Windowed framewise real FFT of a mono waveform."""
    if params is None:
        params = StftParams()
    x = np.asarray(wave.samples, dtype=np.float64)
    if len(x) < 1:
        raise EmptyInputError("cannot transform an empty waveform")

    n_fft, hop = params.n_fft, params.hop
    if params.center:
        pad = n_fft // 2
        if len(x) > 1:
            x = np.pad(x, pad, mode="reflect")
        else:
            x = np.pad(x, pad, mode="constant")
    if len(x) < n_fft:
        x = np.pad(x, (0, n_fft - len(x)), mode="constant")
    n_frames = 1 + (len(x) - n_fft) // hop

    frames = np.lib.stride_tricks.sliding_window_view(x, n_fft)[::hop][:n_frames]
    spec = np.fft.rfft(frames * params.window_array(), axis=1).T
    return ComplexSpectrogram(spec, params)


def _ola_window_sq(params: StftParams, n_frames: int, total: int) -> np.ndarray:
    wsq = params.window_array() ** 2
    den = np.zeros(total)
    for t in range(n_frames):
        den[t * params.hop:t * params.hop + params.n_fft] += wsq
    return den


def istft(spec: ComplexSpectrogram, length: int, sample_rate: int = 1) -> Waveform:
    """Weighted-overlap-add synthesis back to `length` samples.

    Raises NonInvertibleError where the squared-window overlap sum falls
    below the COLA floor inside the requested output range.
    """
    params = spec.params
    n_fft, hop = params.n_fft, params.hop
    n_frames = spec.n_frames
    offset = n_fft // 2 if params.center else 0
    total = (n_frames - 1) * hop + n_fft
    if length < 0 or offset + length > total:
        raise ShapeError(
            f"requested length {length} exceeds synthesizable span {total - offset}"
        )

    win = params.window_array()
    frames = np.fft.irfft(spec.bins.T, n=n_fft, axis=1) * win
    out = np.zeros(total)
    for t in range(n_frames):
        out[t * hop:t * hop + n_fft] += frames[t]

    den = _ola_window_sq(params, n_frames, total)
    used = slice(offset, offset + length)
    if length and np.min(den[used]) <= COLA_FLOOR:
        raise NonInvertibleError(
            f"window/hop pair fails COLA inside output range "
            f"(min overlap {np.min(den[used]):.3g})"
        )
    safe = np.where(den > COLA_FLOOR, den, 1.0)
    return Waveform((out / safe)[used], sample_rate)


def magnitude(spec: ComplexSpectrogram) -> np.ndarray:
    """Per-bin magnitudes sqrt(re^2 + im^2), shape (F, T_s)."""
    return np.abs(spec.bins)

"""Mel-spaced frequency partition, per-band power envelopes, feature packing.

Each band of width bw contributes 2*bw + 1 input channels per frame:
envelope-normalized real/imaginary values interleaved bin-major
(re0, im0, re1, im1, ...) followed by the log-envelope row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LayoutError
from .spectral import ComplexSpectrogram

DEFAULT_EPS = 1e-8


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@dataclass(frozen=True)
class BandLayout:
    widths: tuple
    F: int

    def __post_init__(self):
        w = tuple(int(x) for x in self.widths)
        if any(x < 1 for x in w):
            raise LayoutError(f"band widths must be >= 1, got {w}")
        if sum(w) != self.F:
            raise LayoutError(f"widths sum to {sum(w)}, expected F={self.F}")
        object.__setattr__(self, "widths", w)

    @property
    def n_band(self) -> int:
        return len(self.widths)

    @property
    def boundaries(self) -> tuple:
        """Cumulative bin offsets, length n_band + 1, ending at F."""
        b = [0]
        for w in self.widths:
            b.append(b[-1] + w)
        return tuple(b)

    def slices(self):
        b = self.boundaries
        return [slice(b[i], b[i + 1]) for i in range(self.n_band)]


def mel_band_layout(F: int, n_band: int, sample_rate: int) -> BandLayout:
    """Partition F bins into n_band contiguous sub-bands with mel-spaced
    boundaries.

    Boundaries come from n_band+1 equally spaced mel points over
    [0, sample_rate/2]. Narrow low bands are forced to width 1 (resolved
    from the low end, where mel bands are narrowest) and the rest are
    rescaled to keep the total at F, then rounded by largest remainder.
    Each integer width stays within one bin of its ideal real width, so
    widths are nondecreasing after the forced prefix.
    """
    if not (1 <= n_band <= F):
        raise LayoutError(f"need 1 <= n_band <= F, got n_band={n_band}, F={F}")
    mel_pts = np.linspace(0.0, hz_to_mel(sample_rate / 2.0), n_band + 1)
    hz = mel_to_hz(mel_pts)
    real = np.diff(hz / (sample_rate / 2.0) * F)   # increasing real widths

    # Force sub-unit widths (always a prefix) to 1 and rescale the rest.
    forced = 0
    scaled = real.copy()
    while forced < n_band:
        remaining = F - forced
        scaled = real[forced:] * remaining / real[forced:].sum()
        if scaled[0] >= 1.0 or forced == n_band - 1:
            break
        forced += int(np.searchsorted(scaled, 1.0))

    widths = np.ones(n_band, dtype=int)
    base = np.floor(scaled).astype(int)
    spare = (F - forced) - int(base.sum())
    # Largest remainder, ties broken toward higher (wider) bands, keeps
    # the rounded widths nondecreasing when the real widths are.
    order = np.argsort(scaled - base, kind="stable")[::-1][:spare]
    base[order] += 1
    widths[forced:] = np.maximum(base, 1)

    # Rounding at the forced/unforced boundary can leave the total off by
    # the clamp above; settle any residue on the widest band.
    widths[-1] += F - int(widths.sum())
    return BandLayout(tuple(widths.tolist()), F)


@dataclass(frozen=True)
class BandEnvelope:
    """Per-band per-frame power envelope, shape (n_band, T_s), all >= sqrt(eps)."""

    values: np.ndarray
    eps: float


def band_envelope(
    spec: ComplexSpectrogram, layout: BandLayout, eps: float = DEFAULT_EPS
) -> BandEnvelope:
    """p_i(t) = sqrt(sum over band bins of re^2 + im^2 + eps)."""
    if layout.F != spec.bins.shape[0]:
        raise LayoutError(
            f"layout covers {layout.F} bins, spectrogram has {spec.bins.shape[0]}"
        )
    if eps < 0:
        raise LayoutError("eps must be nonnegative")
    power = spec.bins.real ** 2 + spec.bins.imag ** 2
    values = np.empty((layout.n_band, spec.n_frames))
    for i, sl in enumerate(layout.slices()):
        values[i] = np.sqrt(power[sl].sum(axis=0) + eps)
    return BandEnvelope(values, eps)


def pack_band_features(
    spec: ComplexSpectrogram, layout: BandLayout, eps: float = DEFAULT_EPS
) -> list[np.ndarray]:
    """Per band: (2*bw_i + 1, T_s) array of normalized re/im plus log-envelope."""
    env = band_envelope(spec, layout, eps)
    packed = []
    for i, sl in enumerate(layout.slices()):
        band = spec.bins[sl]
        p = env.values[i]
        with np.errstate(divide="ignore"):
            norm = band / p  # broadcast over bins
        bw = band.shape[0]
        feats = np.empty((2 * bw + 1, spec.n_frames))
        feats[0:2 * bw:2] = norm.real
        feats[1:2 * bw:2] = norm.imag
        feats[-1] = np.log(p)
        packed.append(feats)
    return packed


def reassemble(band_outputs: list[np.ndarray], layout: BandLayout) -> np.ndarray:
    """Concatenate per-band (bw_i, T_s, 2) grids back to a full (F, T_s, 2) grid."""
    if len(band_outputs) != layout.n_band:
        raise LayoutError(
            f"got {len(band_outputs)} band outputs for {layout.n_band} bands"
        )
    for i, (out, w) in enumerate(zip(band_outputs, layout.widths)):
        if out.ndim != 3 or out.shape[0] != w or out.shape[2] != 2:
            raise LayoutError(
                f"band {i}: expected shape ({w}, T_s, 2), got {out.shape}"
            )
    return np.concatenate(band_outputs, axis=0)

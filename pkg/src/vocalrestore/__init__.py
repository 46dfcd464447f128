"""Single-stage vocal restoration in the complex STFT domain.

Library layout:
  audio_io       WAV I/O and the Waveform type
  spectral       STFT / iSTFT / magnitude
  bandsplit      mel band partition, envelopes, feature packing
  nncore         deterministic neural kernels
  generator      band-split generator forward path + weight files
  discriminator  multi-branch forward-only discriminator
  losses         reconstruction / hinge / feature-matching objectives
  degrade        seeded corruption pipeline
  ranking        Bradley-Terry fitting and fit metrics
  cli            batch commands: restore, degrade, eval, rank, bench
"""

from .audio_io import Waveform, read_wav, write_wav
from .bandsplit import BandLayout, band_envelope, mel_band_layout, pack_band_features
from .generator import (
    ModelConfig,
    generator_forward,
    init_weights,
    load_weights,
    restore,
    save_weights,
    toy_config,
)
from .spectral import ComplexSpectrogram, StftParams, istft, magnitude, stft

__all__ = [
    "Waveform",
    "read_wav",
    "write_wav",
    "BandLayout",
    "mel_band_layout",
    "band_envelope",
    "pack_band_features",
    "ModelConfig",
    "toy_config",
    "init_weights",
    "save_weights",
    "load_weights",
    "generator_forward",
    "restore",
    "StftParams",
    "ComplexSpectrogram",
    "stft",
    "istft",
    "magnitude",
]

__version__ = "0.1.0"

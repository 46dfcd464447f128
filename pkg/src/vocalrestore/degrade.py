"""Seeded, composable corruption pipeline producing degraded/clean pairs.

Randomness comes from numpy's Philox bit generator, a 64-bit counter-based
generator, so traces replay bit-exactly across platforms. Every stage
preserves the input length exactly and never emits NaN/Inf for finite input.

Default stage order: freq_shape -> reverb -> clip -> add_noise ->
spectral_corrupt -> time_varying_gain.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .audio_io import Waveform
from .errors import ConfigError, SilentInputError
from .spectral import ComplexSpectrogram, StftParams, istft, stft

CORRUPT_WINDOWS = (512, 1024, 2048)
CORRUPT_HOPS = (256, 512, 1024)
CLIP_CURVES = ("hard", "tanh", "cubic")
STAGE_ORDER = (
    "freq_shape",
    "reverb",
    "clip",
    "add_noise",
    "spectral_corrupt",
    "time_varying_gain",
)


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def _shape_params(sr: int) -> StftParams:
    # Internal analysis grid for the frequency-shaping stage.
    n_fft = 1024 if sr >= 8000 else 256
    return StftParams(n_fft=n_fft, hop=n_fft // 4)


def freq_shape(wave: Waveform, freqs_hz, gains_db) -> Waveform:
    """Apply a piecewise log-frequency gain curve in the STFT magnitude
    domain (phase untouched); gains interpolate linearly between control
    points on a log-frequency axis."""
    freqs_hz = np.asarray(freqs_hz, dtype=np.float64)
    gains_db = np.asarray(gains_db, dtype=np.float64)
    if np.any(gains_db < -60.0) or np.any(gains_db > 12.0):
        raise ConfigError("gains must lie in [-60, +12] dB")
    params = _shape_params(wave.sample_rate)
    spec = stft(wave, params)
    F = spec.bins.shape[0]
    bin_hz = np.arange(F) * wave.sample_rate / params.n_fft
    log_f = np.log10(np.maximum(bin_hz, 1.0))
    gain_db = np.interp(
        log_f, np.log10(np.maximum(freqs_hz, 1.0)), gains_db
    )
    gain = 10.0 ** (gain_db / 20.0)
    shaped = ComplexSpectrogram(spec.bins * gain[:, None], params)
    return istft(shaped, len(wave), wave.sample_rate)


def reverb(wave: Waveform, rt60: float, wet: float, seed: int) -> Waveform:
    """Convolve with a synthetic impulse response: unit direct tap plus
    seeded white noise under an exponential decay reaching -60 dB at rt60."""
    if not (0.1 <= rt60 <= 3.0):
        raise ConfigError(f"rt60 must be in [0.1, 3.0], got {rt60}")
    if not (0.0 <= wet <= 1.0):
        raise ConfigError(f"wet must be in [0, 1], got {wet}")
    if wet == 0.0:
        return Waveform(wave.samples.copy(), wave.sample_rate)
    sr = wave.sample_rate
    ir_len = min(int(rt60 * 1.5 * sr) + 1, max(len(wave), 1))
    t = np.arange(ir_len) / sr
    ir = _rng(seed).standard_normal(ir_len) * np.exp(-6.91 * t / rt60)
    ir[0] = 1.0
    from scipy.signal import fftconvolve

    rev = fftconvolve(wave.samples, ir)[: len(wave)]
    return Waveform((1.0 - wet) * wave.samples + wet * rev, sr)


def clip(wave: Waveform, curve: str, drive: float) -> Waveform:
    """Drive the signal into one of three odd saturation curves; output is
    bounded in [-1, 1]."""
    if drive < 1.0:
        raise ConfigError(f"drive must be >= 1, got {drive}")
    x = wave.samples * drive
    if curve == "hard":
        y = np.clip(x, -1.0, 1.0)
    elif curve == "tanh":
        y = np.tanh(x)
    elif curve == "cubic":
        y = np.where(np.abs(x) <= 1.0, x - x ** 3 / 3.0, np.sign(x) * (2.0 / 3.0))
        y = y * 1.5  # renormalize the +-2/3 plateau to peak +-1
    else:
        raise ConfigError(f"unknown clip curve {curve!r}")
    return Waveform(y, wave.sample_rate)


def pink_noise(n: int, seed: int) -> np.ndarray:
    """Seeded pink (1/f) noise of unit RMS via spectral shaping."""
    rng = _rng(seed)
    white = rng.standard_normal(n)
    spec = np.fft.rfft(white)
    f = np.arange(len(spec), dtype=np.float64)
    f[0] = 1.0
    spec /= np.sqrt(f)
    out = np.fft.irfft(spec, n=n)
    return out / max(np.sqrt(np.mean(out ** 2)), 1e-12)


def add_noise(wave: Waveform, noise: Waveform, snr_db: float) -> Waveform:
    """Mix in noise scaled so the signal-to-noise power ratio equals snr_db;
    noise is looped/cropped to the signal length."""
    p_sig = float(np.mean(wave.samples ** 2))
    if p_sig <= 0.0:
        raise SilentInputError("cannot set an SNR against a silent signal")
    n = noise.samples
    if len(n) < len(wave):
        reps = int(np.ceil(len(wave) / max(len(n), 1)))
        n = np.tile(n, reps)
    n = n[: len(wave)]
    p_noise = float(np.mean(n ** 2))
    if p_noise <= 0.0:
        raise SilentInputError("noise source is silent")
    scale = np.sqrt(p_sig / (p_noise * 10.0 ** (snr_db / 10.0)))
    return Waveform(wave.samples + scale * n, wave.sample_rate)


def spectral_corrupt(
    wave: Waveform,
    mask_fraction: float,
    phase_noise_std: float,
    seed: int,
    n_fft: int | None = None,
    hop: int | None = None,
) -> Waveform:
    """Zero a random subset of magnitude bins and jitter phases, analyzed and
    resynthesized at a randomly sampled STFT grid (window in {512,1024,2048},
    hop in {256,512,1024}, restricted to hop <= window/2 so resynthesis stays
    invertible under the Hann window)."""
    if not (0.0 <= mask_fraction <= 1.0):
        raise ConfigError(f"mask_fraction must be in [0, 1], got {mask_fraction}")
    rng = _rng(seed)
    if n_fft is None or hop is None:
        while True:
            n_fft = int(rng.choice(CORRUPT_WINDOWS))
            hop = int(rng.choice(CORRUPT_HOPS))
            if 2 * hop <= n_fft:
                break
    params = StftParams(n_fft=n_fft, hop=hop)
    spec = stft(wave, params)
    mag = np.abs(spec.bins)
    phase = np.angle(spec.bins)
    keep = rng.random(mag.shape) >= mask_fraction
    mag = mag * keep
    phase = phase + rng.normal(0.0, phase_noise_std, size=phase.shape)
    corrupted = ComplexSpectrogram(mag * np.exp(1j * phase), params)
    return istft(corrupted, len(wave), wave.sample_rate)


def time_varying_gain(
    wave: Waveform, cutoff_hz: float, depth: float, seed: int
) -> Waveform:
    """Multiply by a smooth random gain envelope g(t) in [1-depth, 1+depth],
    built by brick-wall lowpassing seeded white noise and renormalizing its
    peak."""
    if not (0.0 < cutoff_hz <= 20.0):
        raise ConfigError(f"cutoff_hz must be in (0, 20], got {cutoff_hz}")
    if not (0.0 <= depth <= 1.0):
        raise ConfigError(f"depth must be in [0, 1], got {depth}")
    n = len(wave)
    noise = _rng(seed).standard_normal(n)
    spec = np.fft.rfft(noise)
    f = np.fft.rfftfreq(n, d=1.0 / wave.sample_rate)
    spec[f > cutoff_hz] = 0.0
    env = np.fft.irfft(spec, n=n)
    peak = np.max(np.abs(env))
    if peak > 0:
        env = env / peak
    g = 1.0 + depth * env
    return Waveform(g * wave.samples, wave.sample_rate)


# ---------------------------------------------------------------------------
# Chain configuration, traces, replay
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StageConfig:
    name: str
    prob: float = 0.5
    ranges: dict = field(default_factory=dict)   # param -> (lo, hi)

    def __post_init__(self):
        if not (0.0 <= self.prob <= 1.0):
            raise ConfigError(f"{self.name}: prob must be in [0, 1]")
        for key, (lo, hi) in self.ranges.items():
            if lo > hi:
                raise ConfigError(f"{self.name}.{key}: empty range {lo}..{hi}")


DEFAULT_RANGES = {
    "freq_shape": {"gain_db": (-30.0, 0.0)},
    "reverb": {"rt60": (0.1, 1.5), "wet": (0.1, 0.9)},
    "clip": {"drive": (1.0, 10.0)},
    "add_noise": {"snr_db": (-5.0, 30.0)},
    "spectral_corrupt": {
        "mask_fraction": (0.0, 0.3),
        "phase_noise_std": (0.0, 0.8),
    },
    "time_varying_gain": {"cutoff_hz": (0.5, 8.0), "depth": (0.0, 0.5)},
}

FREQ_SHAPE_POINTS = 5


@dataclass(frozen=True)
class DegradationSpec:
    stages: tuple = ()
    seed: int = 0

    @classmethod
    def default(cls, seed: int = 0, prob: float = 0.5) -> "DegradationSpec":
        return cls(
            tuple(
                StageConfig(name, prob, dict(DEFAULT_RANGES[name]))
                for name in STAGE_ORDER
            ),
            seed,
        )

    def to_text(self) -> str:
        lines = [f"seed = {self.seed}", ""]
        for stage in self.stages:
            lines.append(f"[{stage.name}]")
            lines.append(f"prob = {stage.prob}")
            for key, (lo, hi) in stage.ranges.items():
                lines.append(f"{key} = {lo}..{hi}")
            lines.append("")
        return "\n".join(lines)

    @classmethod
    def from_text(cls, text: str) -> "DegradationSpec":
        seed = 0
        stages = []
        current = None
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                if current is not None:
                    stages.append(StageConfig(**current))
                current = {"name": line[1:-1], "prob": 0.5, "ranges": {}}
                continue
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if current is None:
                if key != "seed":
                    raise ConfigError(f"unexpected key {key!r} before any stage")
                seed = int(value)
            elif key == "prob":
                current["prob"] = float(value)
            else:
                lo, sep, hi = value.partition("..")
                if not sep:
                    raise ConfigError(f"{key}: expected a lo..hi range, got {value!r}")
                current["ranges"][key] = (float(lo), float(hi))
        if current is not None:
            stages.append(StageConfig(**current))
        return cls(tuple(stages), seed)


@dataclass
class StageTrace:
    """Per-stage record of the parameters actually applied."""

    entries: list = field(default_factory=list)

    def to_json_lines(self) -> str:
        return "\n".join(json.dumps(e, sort_keys=True) for e in self.entries)

    @classmethod
    def from_json_lines(cls, text: str) -> "StageTrace":
        return cls([json.loads(line) for line in text.splitlines() if line.strip()])


def _sample(rng, lo, hi):
    return float(rng.uniform(lo, hi))


def _apply_stage(wave: Waveform, name: str, params: dict) -> Waveform:
    if name == "freq_shape":
        return freq_shape(wave, params["freqs_hz"], params["gains_db"])
    if name == "reverb":
        return reverb(wave, params["rt60"], params["wet"], params["seed"])
    if name == "clip":
        return clip(wave, params["curve"], params["drive"])
    if name == "add_noise":
        noise = Waveform(
            pink_noise(len(wave), params["seed"]), wave.sample_rate
        )
        return add_noise(wave, noise, params["snr_db"])
    if name == "spectral_corrupt":
        return spectral_corrupt(
            wave,
            params["mask_fraction"],
            params["phase_noise_std"],
            params["seed"],
            n_fft=params["n_fft"],
            hop=params["hop"],
        )
    if name == "time_varying_gain":
        return time_varying_gain(
            wave, params["cutoff_hz"], params["depth"], params["seed"]
        )
    raise ConfigError(f"unknown stage {name!r}")


def _sample_stage_params(name: str, stage: StageConfig, rng, sub_seed: int, sr: int):
    r = stage.ranges
    if name == "freq_shape":
        lo, hi = r["gain_db"]
        freqs = np.logspace(
            np.log10(50.0), np.log10(sr / 2.0), FREQ_SHAPE_POINTS
        )
        return {
            "freqs_hz": [float(f) for f in freqs],
            "gains_db": [_sample(rng, lo, hi) for _ in range(FREQ_SHAPE_POINTS)],
        }
    if name == "reverb":
        return {
            "rt60": _sample(rng, *r["rt60"]),
            "wet": _sample(rng, *r["wet"]),
            "seed": sub_seed,
        }
    if name == "clip":
        return {
            "curve": CLIP_CURVES[int(rng.integers(len(CLIP_CURVES)))],
            "drive": _sample(rng, *r["drive"]),
        }
    if name == "add_noise":
        return {"snr_db": _sample(rng, *r["snr_db"]), "seed": sub_seed}
    if name == "spectral_corrupt":
        while True:
            n_fft = int(rng.choice(CORRUPT_WINDOWS))
            hop = int(rng.choice(CORRUPT_HOPS))
            if 2 * hop <= n_fft:
                break
        return {
            "mask_fraction": _sample(rng, *r["mask_fraction"]),
            "phase_noise_std": _sample(rng, *r["phase_noise_std"]),
            "n_fft": n_fft,
            "hop": hop,
            "seed": sub_seed,
        }
    if name == "time_varying_gain":
        return {
            "cutoff_hz": _sample(rng, *r["cutoff_hz"]),
            "depth": _sample(rng, *r["depth"]),
            "seed": sub_seed,
        }
    raise ConfigError(f"unknown stage {name!r}")


def apply_chain(wave: Waveform, spec: DegradationSpec):
    """Apply the configured stages in order, each enabled by an independent
    seeded draw. Returns (degraded waveform, trace). Deterministic per
    (wave, spec)."""
    out = wave
    trace = StageTrace()
    for idx, stage in enumerate(spec.stages):
        ss = np.random.SeedSequence([spec.seed, idx])
        rng = np.random.Generator(np.random.Philox(ss))
        sub_seed = int(ss.generate_state(1)[0])
        enabled = bool(rng.random() < stage.prob)
        if not enabled:
            continue
        params = _sample_stage_params(
            stage.name, stage, rng, sub_seed, wave.sample_rate
        )
        out = _apply_stage(out, stage.name, params)
        trace.entries.append({"stage": stage.name, "params": params})
    return out, trace


def replay_trace(wave: Waveform, trace: StageTrace) -> Waveform:
    """Reapply the exact recorded parameters; bit-exact against apply_chain."""
    out = wave
    for entry in trace.entries:
        out = _apply_stage(out, entry["stage"], entry["params"])
    return out

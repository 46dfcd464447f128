"""End-to-end band-split generator: stem, band-sequence blocks, synthesis
heads, reassembly, plus weight init/serialization and waveform restoration.

Forward math runs in float32 (deployment precision); the STFT front/back end
stays in float64. All operations are deterministic.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, asdict

import numpy as np

from . import nncore
from .audio_io import Waveform
from .bandsplit import BandLayout, mel_band_layout, pack_band_features, reassemble
from .errors import FormatError, ManifestError, SampleRateError, ShapeError
from .spectral import ComplexSpectrogram, StftParams, istft, stft
from .nncore import (
    attention_core,
    depthwise_conv1d,
    glu,
    pointwise_conv,
    rmsnorm,
    silu,
)

WEIGHT_MAGIC = b"SRSW0001"
LAYER_SCALE_INIT = 1e-6
CONVNEXT_BLOCKS_PER_LAYER = 3  # dilations {1, d, 1}


@dataclass(frozen=True)
class ModelConfig:
    sample_rate: int = 48000
    n_fft: int = 4096
    hop: int = 2048
    n_band: int = 64
    N: int = 128
    L: int = 6
    heads: int = 4
    conv_kernel: int = 3
    dilation_cap: int = 8
    ff_expansion: int = 2
    eps: float = 1e-8
    sequential_paths: bool = False   # sum the two pathways (default) or chain them
    shared_temporal: bool = True     # temporal-path weights shared across bands

    def __post_init__(self):
        F = self.n_fft // 2 + 1
        if not (1 <= self.n_band <= F):
            raise ShapeError(f"need 1 <= n_band <= F={F}, got {self.n_band}")
        if self.N % self.heads:
            raise ShapeError(f"N={self.N} not divisible by heads={self.heads}")
        if self.L < 1 or self.dilation_cap < 1:
            raise ShapeError("L and dilation_cap must be >= 1")

    @property
    def F(self) -> int:
        return self.n_fft // 2 + 1

    def layout(self) -> BandLayout:
        return mel_band_layout(self.F, self.n_band, self.sample_rate)

    def dilations(self, layer_index: int) -> tuple:
        d = min(2 ** (layer_index + 1), self.dilation_cap)
        return (1, d, 1)

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in asdict(self).items())

    @classmethod
    def from_text(cls, text: str) -> "ModelConfig":
        kwargs = {}
        casts = {f.name: f.type for f in cls.__dataclass_fields__.values()}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in cls.__dataclass_fields__:
                raise FormatError(f"unknown config key {key!r}")
            if value in ("True", "False"):
                kwargs[key] = value == "True"
            elif key == "eps":
                kwargs[key] = float(value)
            else:
                kwargs[key] = int(value)
        return cls(**kwargs)


def toy_config(**overrides) -> ModelConfig:
    base = dict(
        sample_rate=16000, n_fft=256, hop=128, n_band=8, N=16, L=2, heads=2
    )
    base.update(overrides)
    return ModelConfig(**base)


def parameter_manifest(config: ModelConfig) -> dict:
    """Ordered map of parameter name -> shape implied by the config."""
    layout = config.layout()
    N, ff = config.N, config.ff_expansion
    manifest: dict[str, tuple] = {}

    for i, bw in enumerate(layout.widths):
        c = 2 * bw + 1
        manifest[f"stem.band{i}.norm.gain"] = (c,)
        manifest[f"stem.band{i}.proj.weight"] = (N, c)
        manifest[f"stem.band{i}.proj.bias"] = (N,)

    for layer in range(config.L):
        p = f"block{layer}"
        manifest[f"{p}.attn.norm.gain"] = (N,)
        for name in ("q", "k", "v", "out"):
            manifest[f"{p}.attn.{name}.weight"] = (N, N)
            manifest[f"{p}.attn.{name}.bias"] = (N,)
        manifest[f"{p}.ffn.norm.gain"] = (N,)
        manifest[f"{p}.ffn.w_in.weight"] = (ff * N, N)
        manifest[f"{p}.ffn.w_in.bias"] = (ff * N,)
        manifest[f"{p}.ffn.w_gate.weight"] = (ff * N, N)
        manifest[f"{p}.ffn.w_gate.bias"] = (ff * N,)
        manifest[f"{p}.ffn.w_out.weight"] = (N, ff * N)
        manifest[f"{p}.ffn.w_out.bias"] = (N,)
        for j in range(CONVNEXT_BLOCKS_PER_LAYER):
            q = f"{p}.temporal{j}"
            manifest[f"{q}.dw.kernel"] = (N, config.conv_kernel)
            manifest[f"{q}.dw.bias"] = (N,)
            manifest[f"{q}.norm.gain"] = (N,)
            manifest[f"{q}.pw1.weight"] = (2 * ff * N, N)
            manifest[f"{q}.pw1.bias"] = (2 * ff * N,)
            manifest[f"{q}.pw2.weight"] = (N, ff * N)
            manifest[f"{q}.pw2.bias"] = (N,)
            manifest[f"{q}.gamma"] = (N,)

    for i, bw in enumerate(layout.widths):
        manifest[f"head.band{i}.norm.gain"] = (N,)
        manifest[f"head.band{i}.conv1.weight"] = (N, N)
        manifest[f"head.band{i}.conv1.bias"] = (N,)
        manifest[f"head.band{i}.conv2.weight"] = (4 * bw, N)
        manifest[f"head.band{i}.conv2.bias"] = (4 * bw,)
    return manifest


def init_weights(config: ModelConfig, seed: int) -> dict:
    """Deterministic init: projections/convs uniform +-sqrt(1/fan_in),
    norm gains 1, biases 0, layer-scale gammas 1e-6. float32 storage."""
    rng = np.random.Generator(np.random.Philox(seed))
    store: dict[str, np.ndarray] = {}
    for name, shape in parameter_manifest(config).items():
        if name.endswith("norm.gain"):
            arr = np.ones(shape)
        elif name.endswith(".gamma"):
            arr = np.full(shape, LAYER_SCALE_INIT)
        elif name.endswith(".bias"):
            arr = np.zeros(shape)
        else:
            fan_in = shape[-1]
            bound = np.sqrt(1.0 / fan_in)
            arr = rng.uniform(-bound, bound, size=shape)
        store[name] = arr.astype(np.float32)
    return store


def check_weights(store: dict, config: ModelConfig) -> None:
    manifest = parameter_manifest(config)
    missing = sorted(set(manifest) - set(store))
    extra = sorted(set(store) - set(manifest))
    if missing or extra:
        raise ManifestError(f"missing={missing[:5]} extra={extra[:5]}")
    for name, shape in manifest.items():
        if tuple(store[name].shape) != tuple(shape):
            raise ShapeError(
                f"{name}: expected shape {shape}, got {store[name].shape}"
            )
        if not np.all(np.isfinite(store[name])):
            raise ShapeError(f"{name}: non-finite values")


def save_weights(store: dict, path) -> None:
    """Binary format: magic, u32-length-prefixed JSON manifest, f32 LE payload."""
    entries = []
    offset = 0
    blobs = []
    for name in store:
        arr = np.ascontiguousarray(store[name], dtype="<f4")
        entries.append(
            {"name": name, "shape": list(arr.shape), "dtype": "f32", "offset": offset}
        )
        blobs.append(arr.tobytes())
        offset += len(blobs[-1])
    manifest = json.dumps(entries).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(WEIGHT_MAGIC)
        fh.write(struct.pack("<I", len(manifest)))
        fh.write(manifest)
        for blob in blobs:
            fh.write(blob)


def load_weights(path) -> dict:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != WEIGHT_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        (mlen,) = struct.unpack("<I", fh.read(4))
        try:
            entries = json.loads(fh.read(mlen).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"{path}: corrupt manifest: {exc}") from exc
        payload = fh.read()
    store = {}
    for e in entries:
        n = int(np.prod(e["shape"])) if e["shape"] else 1
        raw = payload[e["offset"]:e["offset"] + 4 * n]
        if len(raw) != 4 * n:
            raise ManifestError(f"{path}: truncated payload for {e['name']}")
        store[e["name"]] = np.frombuffer(raw, dtype="<f4").reshape(e["shape"]).copy()
    return store


# ---------------------------------------------------------------------------
# Forward path
# ---------------------------------------------------------------------------


def stem(packed: list[np.ndarray], weights: dict, config: ModelConfig) -> np.ndarray:
    """Per-band RMSNorm + 1x1 projection to the shared width N.

    Returns H0 of shape (n_band, N, T_s).
    """
    if len(packed) != config.n_band:
        raise ShapeError(f"expected {config.n_band} bands, got {len(packed)}")
    T = packed[0].shape[1]
    H = np.empty((config.n_band, config.N, T), dtype=packed[0].dtype)
    for i, feats in enumerate(packed):
        p = f"stem.band{i}"
        x = rmsnorm(feats, weights[f"{p}.norm.gain"])
        H[i] = pointwise_conv(x, weights[f"{p}.proj.weight"], weights[f"{p}.proj.bias"])
    return H


def _rmsnorm_bnt(H: np.ndarray, gain: np.ndarray) -> np.ndarray:
    """RMSNorm over the feature axis of (n_band, N, T)."""
    ms = np.mean(np.square(H), axis=1, keepdims=True)
    return H / np.sqrt(ms + nncore.RMSNORM_DELTA) * gain[None, :, None]


def _pw_bnt(H: np.ndarray, w: np.ndarray, b: np.ndarray | None) -> np.ndarray:
    """Pointwise conv over the feature axis of (n_band, C_in, T)."""
    out = np.einsum("oc,bct->bot", w, H, optimize=True)
    if b is not None:
        out += b[None, :, None]
    return out


def _attention_path(H: np.ndarray, weights: dict, config: ModelConfig, prefix: str):
    """Cross-band attention + SwiGLU feedforward, each with its own residual.

    H: (n_band, N, T). Attention runs along the band axis independently per
    frame; RoPE on queries/keys is keyed by band index.
    """
    nb, N, T = H.shape
    heads, d = config.heads, N // config.heads
    w = weights

    x = _rmsnorm_bnt(H, w[f"{prefix}.attn.norm.gain"])

    def proj(name):
        y = _pw_bnt(x, w[f"{prefix}.attn.{name}.weight"], w[f"{prefix}.attn.{name}.bias"])
        # (nb, N, T) -> (T, heads, nb, d): sequence axis is the band axis
        return y.reshape(nb, heads, d, T).transpose(3, 1, 0, 2)

    q, k, v = proj("q"), proj("k"), proj("v")
    pos = np.arange(nb)
    q = nncore._rope_apply(q, pos)
    k = nncore._rope_apply(k, pos)
    out = attention_core(q, k, v)                       # (T, heads, nb, d)
    out = out.transpose(2, 1, 3, 0).reshape(nb, N, T)
    out = _pw_bnt(out, w[f"{prefix}.attn.out.weight"], w[f"{prefix}.attn.out.bias"])
    A = H + out

    x = _rmsnorm_bnt(A, w[f"{prefix}.ffn.norm.gain"])
    hidden = silu(
        _pw_bnt(x, w[f"{prefix}.ffn.w_gate.weight"], w[f"{prefix}.ffn.w_gate.bias"])
    ) * _pw_bnt(x, w[f"{prefix}.ffn.w_in.weight"], w[f"{prefix}.ffn.w_in.bias"])
    A = A + _pw_bnt(hidden, w[f"{prefix}.ffn.w_out.weight"], w[f"{prefix}.ffn.w_out.bias"])
    return A - H


def _temporal_path(H, weights, config: ModelConfig, prefix: str, layer_index: int):
    """Stack of dilated depthwise ConvNeXT blocks over time, weights shared
    across bands; returns the delta added to the long residual."""
    nb, N, T = H.shape
    x = H.reshape(nb * N, T)
    w = weights
    for j, dil in enumerate(config.dilations(layer_index)):
        q = f"{prefix}.temporal{j}"
        kern = np.tile(w[f"{q}.dw.kernel"], (nb, 1))
        u = depthwise_conv1d(x, kern, dilation=dil)
        u += np.tile(w[f"{q}.dw.bias"], nb)[:, None]
        u = u.reshape(nb, N, T)
        u = _rmsnorm_bnt(u, w[f"{q}.norm.gain"])
        u = _pw_bnt(u, w[f"{q}.pw1.weight"], w[f"{q}.pw1.bias"])
        u = glu(u, axis=1)
        u = _pw_bnt(u, w[f"{q}.pw2.weight"], w[f"{q}.pw2.bias"])
        x = x + (u * w[f"{q}.gamma"][None, :, None]).reshape(nb * N, T)
    return x.reshape(nb, N, T) - H


def band_sequence_block(
    H: np.ndarray, weights: dict, config: ModelConfig, layer_index: int
) -> np.ndarray:
    """One band-sequence block: cross-band attention pathway plus within-band
    temporal pathway, combined with the block input via a long residual."""
    if H.shape[:2] != (config.n_band, config.N):
        raise ShapeError(f"expected ({config.n_band}, {config.N}, T), got {H.shape}")
    prefix = f"block{layer_index}"
    attn_delta = _attention_path(H, weights, config, prefix)
    if config.sequential_paths:
        mid = H + attn_delta
        return mid + _temporal_path(mid, weights, config, prefix, layer_index)
    return H + attn_delta + _temporal_path(H, weights, config, prefix, layer_index)


def synthesis_head(H_i: np.ndarray, weights: dict, band_index: int, bw: int):
    """RMSNorm -> 1x1 conv -> SiLU -> 1x1 conv -> GLU, reshaped to (bw, T, 2)."""
    p = f"head.band{band_index}"
    x = rmsnorm(H_i, weights[f"{p}.norm.gain"])
    x = pointwise_conv(x, weights[f"{p}.conv1.weight"], weights[f"{p}.conv1.bias"])
    x = silu(x)
    x = pointwise_conv(x, weights[f"{p}.conv2.weight"], weights[f"{p}.conv2.bias"])
    if x.shape[0] != 4 * bw:
        raise ShapeError(f"head {band_index}: pre-GLU channels {x.shape[0]} != {4 * bw}")
    x = glu(x, axis=0)                       # (2*bw, T)
    T = x.shape[1]
    return x.reshape(bw, 2, T).transpose(0, 2, 1)


def generator_forward(
    X: ComplexSpectrogram, weights: dict, config: ModelConfig
) -> ComplexSpectrogram:
    """Full generator pipeline on a complex spectrogram of matching F."""
    if X.bins.shape[0] != config.F:
        raise ShapeError(f"expected F={config.F}, got {X.bins.shape[0]}")
    layout = config.layout()
    packed = [p.astype(np.float32) for p in pack_band_features(X, layout, config.eps)]
    w32 = {k: np.asarray(v, dtype=np.float32) for k, v in weights.items()}

    H = stem(packed, w32, config)
    for layer in range(config.L):
        H = band_sequence_block(H, w32, config, layer)

    outputs = [
        synthesis_head(H[i], w32, i, bw) for i, bw in enumerate(layout.widths)
    ]
    grid = reassemble(outputs, layout).astype(np.float64)
    return ComplexSpectrogram(grid[..., 0] + 1j * grid[..., 1], X.params)


def restore(wave: Waveform, weights: dict, config: ModelConfig) -> Waveform:
    """Waveform-to-waveform restoration: stft -> generator -> istft."""
    if wave.sample_rate != config.sample_rate:
        raise SampleRateError(
            f"waveform is {wave.sample_rate} Hz, model expects {config.sample_rate}"
        )
    params = StftParams(n_fft=config.n_fft, hop=config.hop)
    X = stft(wave, params)
    Xhat = generator_forward(X, weights, config)
    return istft(Xhat, len(wave), sample_rate=wave.sample_rate)


def restore_chunked(
    wave: Waveform,
    weights: dict,
    config: ModelConfig,
    chunk_s: float = 30.0,
    overlap_s: float = 1.0,
) -> Waveform:
    """Process long inputs in fixed chunks with a linear crossfade in the
    overlap region; short inputs go through restore() directly."""
    sr = wave.sample_rate
    chunk = int(chunk_s * sr)
    overlap = int(overlap_s * sr)
    if len(wave) <= chunk:
        return restore(wave, weights, config)

    hopsz = chunk - overlap
    out = np.zeros(len(wave))
    norm = np.zeros(len(wave))
    start = 0
    while start < len(wave):
        end = min(start + chunk, len(wave))
        piece = restore(Waveform(wave.samples[start:end], sr), weights, config)
        fade = np.ones(end - start)
        if start > 0:
            ramp = min(overlap, end - start)
            fade[:ramp] = np.linspace(0.0, 1.0, ramp, endpoint=False)
        if end < len(wave):
            ramp = min(overlap, end - start)
            fade[-ramp:] = np.linspace(1.0, 0.0, ramp)
        out[start:end] += piece.samples * fade
        norm[start:end] += fade
        if end == len(wave):
            break
        start += hopsz
    norm[norm == 0] = 1.0
    return Waveform(out / norm, sr)

"""Time-domain audio, STFT analysis/synthesis, WAV persistence, SNR mixing.

All operations are pure functions over immutable inputs. Synthesis uses
weighted overlap-add normalized by the summed squared window, so any
window/hop pair with full nonzero coverage reconstructs exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

DEFAULT_WINDOW_LEN = 510
DEFAULT_HOP = 128

PCM16_SCALE = 32768.0

_FMT_PCM = 1
_FMT_IEEE_FLOAT = 3


class WavFormatError(ValueError):
    """WAV file is malformed or uses an unsupported encoding."""


def _require_finite(values: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{name} contains NaN or Inf")


def make_window(name: str, length: int) -> np.ndarray:
    """Periodic taper of the given length ('hann' or 'rect')."""
    if name == "hann":
        n = np.arange(length)
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / length)
    if name == "rect":
        return np.ones(length)
    raise ValueError(f"unknown window {name!r}")


@dataclass(frozen=True)
class TimeSignal:
    """Mono audio: finite float samples (nominally in [-1, 1]) at a fixed rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("samples must be 1-D")
        _require_finite(samples, "samples")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate

    def energy(self) -> float:
        return float(np.sum(self.samples**2))


@dataclass(frozen=True)
class StftConfig:
    """Analysis/synthesis parameters. Defaults: 510/128 periodic Hann, centered."""

    window_len: int = DEFAULT_WINDOW_LEN
    hop: int = DEFAULT_HOP
    window: str = "hann"
    center: bool = True

    def __post_init__(self):
        if self.window_len <= 0:
            raise ValueError("window_len must be positive")
        if not 0 < self.hop <= self.window_len:
            raise ValueError("need 0 < hop <= window_len")
        make_window(self.window, self.window_len)
        if not self._overlap_add_invertible():
            raise ValueError(
                f"window {self.window!r} with hop {self.hop} leaves zero-weight "
                "samples; round trip would not be invertible"
            )

    @property
    def n_bins(self) -> int:
        return self.window_len // 2 + 1

    def window_array(self) -> np.ndarray:
        return make_window(self.window, self.window_len)

    def _overlap_add_invertible(self) -> bool:
        # every steady-state sample must get positive squared-window weight
        w2 = self.window_array() ** 2
        for offset in range(self.hop):
            if w2[offset :: self.hop].sum() <= 1e-11:
                return False
        return True


@dataclass(frozen=True)
class ComplexSpectrogram:
    """frames x bins grid of complex STFT values plus the config that made it."""

    data: np.ndarray
    config: StftConfig

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.complex128)
        if data.ndim != 2:
            raise ValueError("data must be 2-D (frames x bins)")
        if data.shape[1] != self.config.n_bins:
            raise ValueError(
                f"{data.shape[1]} bins inconsistent with window_len "
                f"{self.config.window_len} (expected {self.config.n_bins})"
            )
        _require_finite(data.view(np.float64), "data")
        object.__setattr__(self, "data", data)

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def n_bins(self) -> int:
        return self.data.shape[1]


def stft(sig: TimeSignal, cfg: StftConfig = StftConfig()) -> ComplexSpectrogram:
    """Short-time Fourier transform, one row per frame, rfft bins."""
    x = sig.samples
    if x.size == 0:
        raise ValueError("empty signal")
    win = cfg.window_array()
    length, hop = cfg.window_len, cfg.hop
    if cfg.center:
        x = np.pad(x, length // 2)
    if x.size < length:
        x = np.pad(x, (0, length - x.size))
    n_frames = 1 + (x.size - length) // hop
    idx = np.arange(length)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = x[idx] * win
    return ComplexSpectrogram(np.fft.rfft(frames, axis=1), cfg)


def istft(
    spec: ComplexSpectrogram,
    cfg: StftConfig,
    out_len: int,
    sample_rate: int = 16000,
) -> TimeSignal:
    """Weighted overlap-add synthesis, output truncated/padded to out_len."""
    if spec.data.shape[1] != cfg.n_bins:
        raise ValueError(
            f"spectrogram has {spec.data.shape[1]} bins, config expects {cfg.n_bins}"
        )
    win = cfg.window_array()
    length, hop = cfg.window_len, cfg.hop
    n_frames = spec.data.shape[0]
    frames = np.fft.irfft(spec.data, n=length, axis=1) * win

    total = length + hop * (n_frames - 1)
    out = np.zeros(total)
    weight = np.zeros(total)
    w2 = win**2
    for m in range(n_frames):
        out[m * hop : m * hop + length] += frames[m]
        weight[m * hop : m * hop + length] += w2
    covered = weight > 1e-11
    out[covered] /= weight[covered]

    if cfg.center:
        out = out[length // 2 :]
    if out.size < out_len:
        out = np.pad(out, (0, out_len - out.size))
    return TimeSignal(out[:out_len], sample_rate)


def read_wav(path) -> TimeSignal:
    """Read a mono RIFF/WAVE file (PCM16 or IEEE float32).

    PCM16 samples are decoded to [-1, 1) by division by 32768.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise WavFormatError("not a RIFF/WAVE file")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos : pos + 4]
        (size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8 : pos + 8 + size]
        if len(body) < size:
            raise WavFormatError(f"truncated {chunk_id!r} chunk")
        if chunk_id == b"fmt ":
            if size < 16:
                raise WavFormatError("fmt chunk too short")
            tag, channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", body)
            fmt = (tag, channels, rate, bits)
        elif chunk_id == b"data":
            data = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned

    if fmt is None or data is None:
        raise WavFormatError("missing fmt or data chunk")
    tag, channels, rate, bits = fmt
    if channels != 1:
        raise WavFormatError(f"unsupported channel count {channels}")
    if (tag, bits) == (_FMT_PCM, 16):
        samples = np.frombuffer(data, dtype="<i2").astype(np.float64) / PCM16_SCALE
    elif (tag, bits) == (_FMT_IEEE_FLOAT, 32):
        samples = np.frombuffer(data, dtype="<f4").astype(np.float64)
    else:
        raise WavFormatError(f"unsupported encoding (format tag {tag}, {bits}-bit)")
    return TimeSignal(samples, rate)


def write_wav(path, sig: TimeSignal, bit_depth: str = "pcm16") -> None:
    """Write a mono WAV file; PCM16 saturates outside [-1, 1)."""
    if bit_depth == "pcm16":
        quantized = np.clip(np.rint(sig.samples * PCM16_SCALE), -32768, 32767)
        payload = quantized.astype("<i2").tobytes()
        tag, bits = _FMT_PCM, 16
    elif bit_depth == "float32":
        payload = sig.samples.astype("<f4").tobytes()
        tag, bits = _FMT_IEEE_FLOAT, 32
    else:
        raise ValueError(f"unsupported bit_depth {bit_depth!r}")

    block = bits // 8
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(payload),
        b"WAVE",
        b"fmt ",
        16,
        tag,
        1,
        sig.sample_rate,
        sig.sample_rate * block,
        block,
        bits,
        b"data",
        len(payload),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def mix_at_snr(
    clean: TimeSignal, noise: TimeSignal, snr_db: float
) -> tuple[TimeSignal, TimeSignal]:
    """Scale noise so 10*log10(E_clean / E_noise) == snr_db; return (clean+noise, noise).

    This is the additive observation model y = x0 + n.
    """
    if len(clean) != len(noise):
        raise ValueError("clean and noise must have equal length")
    if clean.sample_rate != noise.sample_rate:
        raise ValueError("clean and noise must share a sample rate")
    e_clean = clean.energy()
    e_noise = noise.energy()
    if e_clean <= 0.0:
        raise ValueError("clean signal has zero energy")
    if e_noise <= 0.0:
        raise ValueError("noise signal has zero energy")
    scale = np.sqrt(e_clean / (e_noise * 10.0 ** (snr_db / 10.0)))
    scaled = noise.samples * scale
    rate = clean.sample_rate
    return TimeSignal(clean.samples + scaled, rate), TimeSignal(scaled, rate)

"""Synthetic corpus generation and manifests: the desk-scale stand-in for a
recorded speech+noise dataset.

Clean kinds: 'harmonic' (random fundamental plus harmonics), 'filtered-noise'
(low-passed Gaussian noise), 'gaussian-prior' (per-bin complex Gaussian
spectrogram synthesized to audio, so the analytic oracle's assumptions hold
end to end). Noise kinds: 'white', 'pink', 'babble' (band-passed noise).

Corpora are written as float32 WAV (PCM16 quantization would perturb the
recorded SNRs beyond the manifest tolerance) and are a pure function of
(spec, seed).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sp_signal

from .audio import ComplexSpectrogram, StftConfig, TimeSignal, istft, mix_at_snr, write_wav

CLEAN_KINDS = ("harmonic", "filtered-noise", "gaussian-prior")
NOISE_KINDS = ("white", "pink", "babble")

PEAK_LIMIT = 0.99


@dataclass(frozen=True)
class CorpusSpec:
    n_utterances: int
    duration_s: float = 1.0
    sample_rate: int = 16000
    clean_kind: str = "harmonic"
    noise_kind: str = "white"
    snr_grid: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0)
    seed: int = 0
    stft: StftConfig = field(default_factory=StftConfig)  # gaussian-prior kind only

    def __post_init__(self):
        if self.n_utterances <= 0:
            raise ValueError("n_utterances must be positive")
        if len(self.snr_grid) == 0:
            raise ValueError("snr_grid must be non-empty")
        if self.clean_kind not in CLEAN_KINDS:
            raise ValueError(f"clean_kind must be one of {CLEAN_KINDS}")
        if self.noise_kind not in NOISE_KINDS:
            raise ValueError(f"noise_kind must be one of {NOISE_KINDS}")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * self.sample_rate))


def shaped_var_profile(n_bins: int) -> np.ndarray:
    """Per-bin clean variance profile for the gaussian-prior kind: a strong
    low band, a mid band, and a near-silent top, roughly speech-shaped."""
    n_strong = max(1, n_bins // 16)
    n_mid = max(1, n_bins // 8)
    profile = np.full(n_bins, 1e-4)
    profile[:n_strong] = 80.0
    profile[n_strong : n_strong + n_mid] = 3.0
    return profile


def _normalize_peak(samples: np.ndarray, target: float = 0.9) -> np.ndarray:
    peak = np.max(np.abs(samples))
    if peak == 0.0:
        return samples
    return samples * (target / peak)


def gen_clean(spec: CorpusSpec, rng: np.random.Generator) -> TimeSignal:
    """Deterministic clean signal for the given spec and generator state."""
    n = spec.n_samples
    sr = spec.sample_rate
    if spec.clean_kind == "harmonic":
        f0 = rng.uniform(80.0, 300.0)
        n_harmonics = int(rng.integers(3, 9))
        times = np.arange(n) / sr
        out = np.zeros(n)
        for k in range(1, n_harmonics + 1):
            freq = f0 * k
            if freq >= 0.45 * sr:
                break
            out += rng.uniform(0.3, 1.0) / k * np.sin(
                2.0 * np.pi * freq * times + rng.uniform(0.0, 2.0 * np.pi)
            )
        samples = _normalize_peak(out)
    elif spec.clean_kind == "filtered-noise":
        white = rng.standard_normal(n)
        b, a = sp_signal.butter(4, 0.25)
        samples = _normalize_peak(sp_signal.lfilter(b, a, white))
    else:  # gaussian-prior
        cfg = spec.stft
        var_profile = shaped_var_profile(cfg.n_bins)
        n_frames = 1 + n // cfg.hop
        grid = (
            rng.standard_normal((n_frames, cfg.n_bins))
            + 1j * rng.standard_normal((n_frames, cfg.n_bins))
        ) * np.sqrt(0.5 * var_profile)
        samples = istft(ComplexSpectrogram(grid, cfg), cfg, n, sr).samples
        peak = np.max(np.abs(samples))
        if peak > PEAK_LIMIT:  # constant rescale keeps the prior Gaussian
            samples = samples * (PEAK_LIMIT / peak)
    return TimeSignal(samples, sr)


def gen_noise(spec: CorpusSpec, rng: np.random.Generator) -> TimeSignal:
    """Unit-scale noise; mix_at_snr rescales it anyway."""
    n = spec.n_samples
    sr = spec.sample_rate
    white = rng.standard_normal(n)
    if spec.noise_kind == "white":
        samples = white
    elif spec.noise_kind == "pink":
        spectrum = np.fft.rfft(white)
        freqs = np.fft.rfftfreq(n, d=1.0 / sr)
        spectrum /= np.sqrt(np.maximum(freqs, freqs[1]))
        samples = np.fft.irfft(spectrum, n=n)
    else:  # babble: band-passed noise
        b, a = sp_signal.butter(4, [300.0 / (sr / 2), 3000.0 / (sr / 2)], btype="band")
        samples = sp_signal.lfilter(b, a, white)
    return TimeSignal(_normalize_peak(samples), sr)


@dataclass(frozen=True)
class ManifestEntry:
    utt_id: str
    clean: str  # paths relative to the manifest directory
    noise: str
    noisy: str
    snr_db: float
    seed: int


@dataclass(frozen=True)
class Manifest:
    root: str
    entries: tuple[ManifestEntry, ...]

    def path(self, rel: str) -> str:
        return os.path.join(self.root, rel)

    def __len__(self) -> int:
        return len(self.entries)


MANIFEST_NAME = "manifest.tsv"
_HEADER = "id\tclean\tnoise\tnoisy\tsnr_db\tseed"


def write_manifest(manifest: Manifest) -> str:
    path = os.path.join(manifest.root, MANIFEST_NAME)
    with open(path, "w") as fh:
        fh.write(_HEADER + "\n")
        for e in manifest.entries:
            fh.write(f"{e.utt_id}\t{e.clean}\t{e.noise}\t{e.noisy}\t{e.snr_db:.6f}\t{e.seed}\n")
    return path


def read_manifest(path) -> Manifest:
    root = os.path.dirname(os.path.abspath(path))
    entries = []
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if header != _HEADER:
            raise ValueError(f"unrecognized manifest header: {header!r}")
        for line in fh:
            utt_id, clean, noise, noisy, snr_db, seed = line.rstrip("\n").split("\t")
            entries.append(
                ManifestEntry(utt_id, clean, noise, noisy, float(snr_db), int(seed))
            )
    ids = [e.utt_id for e in entries]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate utterance ids in manifest")
    return Manifest(root, tuple(entries))


def build_corpus(spec: CorpusSpec, out_dir, force: bool = False) -> Manifest:
    """Generate clean/noise/noisy WAV triples plus a manifest.

    Fully reproducible from (spec, seed): per-utterance generators are
    spawned from one seed sequence, and the mixing SNR is drawn from the
    spec's grid.
    """
    out_dir = os.path.abspath(out_dir)
    manifest_path = os.path.join(out_dir, MANIFEST_NAME)
    if os.path.exists(manifest_path) and not force:
        raise FileExistsError(
            f"{manifest_path} already exists; pass force=True (--force) to overwrite"
        )
    for sub in ("clean", "noise", "noisy"):
        os.makedirs(os.path.join(out_dir, sub), exist_ok=True)

    children = np.random.SeedSequence(spec.seed).spawn(spec.n_utterances)
    entries = []
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        utt_id = f"utt_{i:04d}"
        clean = gen_clean(spec, rng)
        noise = gen_noise(spec, rng)
        snr_db = float(rng.choice(spec.snr_grid))
        noisy, scaled_noise = mix_at_snr(clean, noise, snr_db)

        rels = {}
        for sub, sig in (("clean", clean), ("noise", scaled_noise), ("noisy", noisy)):
            rel = os.path.join(sub, f"{utt_id}.wav")
            write_wav(os.path.join(out_dir, rel), sig, bit_depth="float32")
            rels[sub] = rel
        entries.append(
            ManifestEntry(utt_id, rels["clean"], rels["noise"], rels["noisy"], snr_db, spec.seed)
        )

    manifest = Manifest(out_dir, tuple(entries))
    write_manifest(manifest)
    return manifest


def measured_snr(clean: TimeSignal, noise: TimeSignal) -> float:
    """SNR implied by the two signals' energies, in dB."""
    return 10.0 * np.log10(clean.energy() / noise.energy())

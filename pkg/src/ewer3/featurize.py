"""Acoustic and lexical featurization.

Acoustic frames are log-mel filterbank energies computed from 16 kHz PCM
audio; they stand in for a frozen pretrained speech encoder, whose output can
be loaded instead from EWF1 feature files. The lexical side hashes words into
a fixed vocabulary whose embedding table is trained by the estimator;
precomputed sentence vectors load from EWL1 files.

EWF1 layout (little-endian): magic b"EWF1", uint32 rows T, uint32 cols D,
then T*D float32 values row-major. EWL1: magic b"EWL1", uint32 length, then
that many float32 values.
"""

import struct
import wave
from dataclasses import dataclass

import numpy as np

from .errors import DataError, FormatError

TARGET_RATE = 16000

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray  # float64 in [-1, 1]
    sample_rate: int


@dataclass(frozen=True)
class FeaturizerConfig:
    window_samples: int = 400
    hop_samples: int = 160
    n_mels: int = 40
    log_floor: float = 1e-10
    vocab_size: int = 4096
    embed_dim: int = 32
    max_frames: int = 0  # 0 = keep all frames; >0 truncates loaded/computed features

    def __post_init__(self):
        if self.window_samples <= 0:
            raise DataError("window_samples must be > 0")
        if self.hop_samples <= 0:
            raise DataError("hop_samples must be > 0")
        if self.n_mels <= 0:
            raise DataError("n_mels must be > 0")
        if self.vocab_size <= 0:
            raise DataError("vocab_size must be > 0")
        if self.embed_dim <= 0:
            raise DataError("embed_dim must be > 0")
        if self.max_frames < 0:
            raise DataError("max_frames must be >= 0")


def resample_linear(samples: np.ndarray, src_rate: int, dst_rate: int = TARGET_RATE) -> np.ndarray:
    """Linear-interpolation resampling.

    Output length M = round(N * dst/src); output sample k reads input position
    k * src/dst, clamped to the last input sample.
    """
    n = len(samples)
    m = int(round(n * dst_rate / src_rate))
    positions = np.arange(m) * (src_rate / dst_rate)
    return np.interp(positions, np.arange(n), samples)


def read_wav(path) -> AudioClip:
    """Read a 16-bit PCM WAV as float64 mono at 16 kHz.

    Values are scaled by 1/32768; stereo is downmixed by per-sample channel
    average; other sample rates are linearly resampled to 16 kHz.
    """
    try:
        with wave.open(str(path), "rb") as wf:
            n_channels = wf.getnchannels()
            sampwidth = wf.getsampwidth()
            rate = wf.getframerate()
            n_frames = wf.getnframes()
            if wf.getcomptype() != "NONE":
                raise FormatError(f"{path}: compressed WAV not supported (PCM required)")
            raw = wf.readframes(n_frames)
    except wave.Error as exc:
        raise FormatError(f"{path}: {exc}") from None
    if sampwidth != 2:
        raise FormatError(f"{path}: {8 * sampwidth}-bit samples; 16-bit PCM required")
    if len(raw) < n_frames * n_channels * 2:
        raise FormatError(f"{path}: truncated data chunk")
    if n_frames == 0:
        raise FormatError(f"{path}: zero samples")
    data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if n_channels > 1:
        data = data.reshape(-1, n_channels).mean(axis=1)
    if rate != TARGET_RATE:
        data = resample_linear(data, rate, TARGET_RATE)
    return AudioClip(samples=data, sample_rate=TARGET_RATE)


def write_wav(path, samples: np.ndarray, sample_rate: int = TARGET_RATE) -> None:
    """Write float samples in [-1,1] as 16-bit PCM mono."""
    quantized = np.clip(np.rint(samples * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(sample_rate)
        wf.writeframes(quantized.tobytes())


def mel_scale(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int, window_samples: int, sample_rate: int = TARGET_RATE,
                   f_max: float = 8000.0) -> np.ndarray:
    """Triangular mel filters on the rFFT frequency grid, as an (n_mels, bins) matrix."""
    freqs = np.fft.rfftfreq(window_samples, d=1.0 / sample_rate)
    points = mel_to_hz(np.linspace(mel_scale(0.0), mel_scale(f_max), n_mels + 2))
    bank = np.zeros((n_mels, len(freqs)))
    for i in range(n_mels):
        lo, center, hi = points[i], points[i + 1], points[i + 2]
        rising = (freqs - lo) / (center - lo)
        falling = (hi - freqs) / (hi - center)
        bank[i] = np.maximum(0.0, np.minimum(rising, falling))
    return bank


def logmel(clip: AudioClip, cfg: FeaturizerConfig) -> np.ndarray:
    """Log-mel frame features, (T, n_mels) float64 with T = (N - window)//hop + 1.

    Per frame: Hann window, magnitude rFFT, triangular mel filterbank over
    0-8000 Hz, natural log of max(energy, log_floor).
    """
    n = len(clip.samples)
    if n < cfg.window_samples:
        raise DataError(
            f"clip of {n} samples shorter than one window ({cfg.window_samples})"
        )
    n_frames = (n - cfg.window_samples) // cfg.hop_samples + 1
    window = np.hanning(cfg.window_samples)
    starts = np.arange(n_frames) * cfg.hop_samples
    frames = np.stack([clip.samples[s:s + cfg.window_samples] for s in starts])
    spectrum = np.abs(np.fft.rfft(frames * window, axis=1))
    energies = spectrum @ mel_filterbank(cfg.n_mels, cfg.window_samples).T
    feats = np.log(np.maximum(energies, cfg.log_floor))
    if cfg.max_frames and len(feats) > cfg.max_frames:
        feats = feats[: cfg.max_frames]
    return feats


def stable_hash(word: str) -> int:
    """64-bit FNV-1a over the UTF-8 bytes of the word."""
    h = _FNV_OFFSET
    for byte in word.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def lexical_tokenize(text: str, cfg: FeaturizerConfig) -> list:
    """Whitespace words mapped to hashed ids in [0, vocab_size)."""
    return [stable_hash(w) % cfg.vocab_size for w in text.split()]


def lexical_embed(ids, table: np.ndarray) -> np.ndarray:
    """Mean of the table rows selected by ids; empty sequence gives the zero vector."""
    if len(ids) == 0:
        return np.zeros(table.shape[1])
    ids = np.asarray(ids)
    if ids.min() < 0 or ids.max() >= table.shape[0]:
        raise DataError(
            f"token id out of range [0, {table.shape[0]}): {int(ids.min())}..{int(ids.max())}"
        )
    return table[ids].mean(axis=0)


def save_features(path, matrix: np.ndarray) -> None:
    """Write a (T, D) matrix as EWF1 (float32 payload)."""
    m = np.ascontiguousarray(matrix, dtype="<f4")
    if m.ndim != 2 or m.shape[0] < 1:
        raise DataError(f"feature matrix must be 2-D with T >= 1, got shape {m.shape}")
    with open(path, "wb") as fh:
        fh.write(b"EWF1")
        fh.write(struct.pack("<II", m.shape[0], m.shape[1]))
        fh.write(m.tobytes())


def load_features(path) -> np.ndarray:
    """Read an EWF1 file back as a (T, D) float64 matrix."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:4] != b"EWF1":
        raise FormatError(f"{path}: bad magic (EWF1 expected)")
    rows, cols = struct.unpack("<II", blob[4:12])
    expected = rows * cols * 4
    if rows < 1 or cols < 1 or expected > len(blob) - 12:
        if len(blob) - 12 < expected:
            raise FormatError(
                f"{path}: truncated payload ({len(blob) - 12} bytes, {expected} declared)"
            )
        raise FormatError(f"{path}: invalid dimensions {rows}x{cols}")
    values = np.frombuffer(blob[12:12 + expected], dtype="<f4")
    return values.astype(np.float64).reshape(rows, cols)


def save_lexical(path, vector: np.ndarray) -> None:
    """Write a 1-D vector as EWL1 (float32 payload)."""
    v = np.ascontiguousarray(vector, dtype="<f4")
    if v.ndim != 1:
        raise DataError(f"lexical vector must be 1-D, got shape {v.shape}")
    with open(path, "wb") as fh:
        fh.write(b"EWL1")
        fh.write(struct.pack("<I", v.shape[0]))
        fh.write(v.tobytes())


def load_lexical(path) -> np.ndarray:
    """Read an EWL1 file back as a 1-D float64 vector."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 8 or blob[:4] != b"EWL1":
        raise FormatError(f"{path}: bad magic (EWL1 expected)")
    (length,) = struct.unpack("<I", blob[4:8])
    expected = length * 4
    if len(blob) - 8 < expected:
        raise FormatError(
            f"{path}: truncated payload ({len(blob) - 8} bytes, {expected} declared)"
        )
    return np.frombuffer(blob[8:8 + expected], dtype="<f4").astype(np.float64)

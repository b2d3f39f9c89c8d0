"""MFCC feature extraction for terrain-impact audio.

Chain per frame: periodic Hann window -> one-sided power spectrum -> 20
triangular mel filters -> natural log with a silence floor -> orthonormal
DCT-II -> keep coefficients 0..12.  A clip's feature vector is the
per-coefficient mean across frames.  Audio is mono PCM16 at a fixed
16 kHz; clips are truncated to the 62.5 ms window of maximal energy before
feature extraction.

The mel scale is the HTK variant mel(f) = 2595*log10(1 + f/700), and the
filters use the classic integer-bin construction: edge frequencies are
snapped to FFT bins via floor((N+1)*f/sr), which makes each unnormalized
triangle peak at exactly 1.
"""

from __future__ import annotations

import functools
import wave
from dataclasses import dataclass

import numpy as np

from .errors import (
    AudioFormatError,
    ConfigError,
    DimensionError,
    InsufficientAudioError,
    NumericError,
    ValidationError,
)

SAMPLE_RATE = 16000
IMPACT_WINDOW_MS = 62.5


@dataclass(frozen=True)
class MfccConfig:
    frame_size: int = 512
    hop: int = 160
    n_mel: int = 20
    n_mfcc: int = 13
    fmin: float = 0.0
    fmax: float = 8000.0
    log_floor: float = 1e-10

    def __post_init__(self):
        if self.n_mfcc > self.n_mel:
            raise ConfigError("n_mfcc must not exceed n_mel")
        if self.frame_size < self.hop or self.hop < 1:
            raise ConfigError("need frame_size >= hop >= 1")
        if self.frame_size < 2 or self.frame_size % 2 != 0:
            raise ConfigError("frame_size must be even and >= 2")
        if not 0.0 <= self.fmin < self.fmax:
            raise ConfigError("need 0 <= fmin < fmax")
        if self.fmax > SAMPLE_RATE / 2:
            raise ConfigError("fmax must not exceed the Nyquist frequency")
        if self.log_floor <= 0.0:
            raise ConfigError("log_floor must be positive")

    @property
    def n_bins(self) -> int:
        return self.frame_size // 2 + 1


@dataclass
class AudioClip:
    """Mono 16 kHz audio; samples are raw 16-bit PCM."""

    samples: np.ndarray  # int16, 1-D
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.int16)
        if self.samples.ndim != 1:
            raise DimensionError("audio samples must be 1-D")
        if self.sample_rate != SAMPLE_RATE:
            raise ValidationError(f"sample rate must be {SAMPLE_RATE} Hz")

    def __len__(self) -> int:
        return len(self.samples)

    def as_float(self) -> np.ndarray:
        """Samples as float64 in [-1, 1)."""
        return self.samples.astype(np.float64) / 32768.0


def mel_from_hz(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def hz_from_mel(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def frame_count(n_samples: int, frame_size: int, hop: int) -> int:
    """Number of full analysis frames: floor((n - frame)/hop) + 1."""
    if n_samples < frame_size:
        raise InsufficientAudioError(
            f"{n_samples} samples but one frame needs {frame_size}"
        )
    return (n_samples - frame_size) // hop + 1


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window of length n."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def power_spectrum(frame: np.ndarray, frame_size: int = 512) -> np.ndarray:
    """Squared-magnitude one-sided DFT of a Hann-windowed frame.

    Returns frame_size//2 + 1 bins (0..Nyquist), no normalization.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape != (frame_size,):
        raise DimensionError(f"frame has shape {frame.shape}, expected ({frame_size},)")
    if not np.all(np.isfinite(frame)):
        raise NumericError("frame contains non-finite values")
    spectrum = np.fft.rfft(frame * hann_window(frame_size))
    return np.abs(spectrum) ** 2


@functools.lru_cache(maxsize=8)
def mel_filterbank(config: MfccConfig = MfccConfig()) -> np.ndarray:
    """Triangular mel filterbank, shape (n_mel, frame_size//2 + 1).

    Centers are uniformly spaced on the mel scale between fmin and fmax,
    snapped to FFT bins; every row is non-negative, peaks at exactly 1 and
    overlaps only its neighbours.
    """
    edges_mel = np.linspace(mel_from_hz(config.fmin), mel_from_hz(config.fmax),
                            config.n_mel + 2)
    edges_hz = hz_from_mel(edges_mel)
    bins = np.floor((config.frame_size + 1) * edges_hz / SAMPLE_RATE).astype(int)
    if np.any(np.diff(bins) < 1):
        raise ConfigError(
            f"{config.n_mel} mel filters do not fit {config.n_bins} spectrum bins"
        )
    fbank = np.zeros((config.n_mel, config.n_bins))
    for m in range(config.n_mel):
        lo, center, hi = bins[m], bins[m + 1], bins[m + 2]
        for k in range(lo, center + 1):
            if k > lo:
                fbank[m, k] = (k - lo) / (center - lo)
        for k in range(center + 1, hi):
            fbank[m, k] = (hi - k) / (hi - center)
    fbank.setflags(write=False)  # cached; callers share the same array
    return fbank


@functools.lru_cache(maxsize=8)
def _dct_matrix(n_mfcc: int, n_mel: int) -> np.ndarray:
    """Orthonormal DCT-II matrix, rows = coefficients 0..n_mfcc-1."""
    j = np.arange(n_mel)
    k = np.arange(n_mfcc)[:, None]
    mat = np.cos(np.pi * k * (2 * j + 1) / (2 * n_mel))
    mat *= np.sqrt(2.0 / n_mel)
    mat[0] *= np.sqrt(0.5)
    mat.setflags(write=False)
    return mat


def mfcc_frames(samples: np.ndarray, config: MfccConfig = MfccConfig()) -> np.ndarray:
    """Per-frame MFCCs for a float sample array, shape (frames, n_mfcc)."""
    x = np.asarray(samples, dtype=np.float64)
    n_frames = frame_count(len(x), config.frame_size, config.hop)
    window = hann_window(config.frame_size)
    starts = np.arange(n_frames) * config.hop
    frames = np.stack([x[s:s + config.frame_size] for s in starts]) * window
    power = np.abs(np.fft.rfft(frames, axis=1)) ** 2
    energies = power @ mel_filterbank(config).T
    log_energies = np.log(np.maximum(energies, config.log_floor))
    return log_energies @ _dct_matrix(config.n_mfcc, config.n_mel).T


def mfcc(clip: AudioClip, config: MfccConfig = MfccConfig()) -> np.ndarray:
    """Clip-level MFCC vector: per-coefficient mean across frames."""
    coeffs = mfcc_frames(clip.as_float(), config).mean(axis=0)
    if not np.all(np.isfinite(coeffs)):
        raise NumericError("MFCC computation produced non-finite coefficients")
    return coeffs


def truncate_to_impact(clip: AudioClip, window_ms: float = IMPACT_WINDOW_MS) -> AudioClip:
    """The contiguous window of maximal energy (earliest on ties).

    Window sums are computed on integer PCM squares, so ties are exact and
    the earliest-window tie-break is deterministic.
    """
    window = int(round(window_ms * clip.sample_rate / 1000.0))
    if len(clip) < window:
        raise InsufficientAudioError(
            f"clip has {len(clip)} samples, impact window needs {window}"
        )
    sq = clip.samples.astype(np.int64) ** 2
    cum = np.concatenate(([0], np.cumsum(sq)))
    energies = cum[window:] - cum[:-window]
    start = int(np.argmax(energies))
    return AudioClip(clip.samples[start:start + window].copy(), clip.sample_rate)


def read_wav(path) -> AudioClip:
    """Read a PCM16 mono little-endian 16 kHz WAV file."""
    try:
        with wave.open(str(path), "rb") as w:
            channels = w.getnchannels()
            width = w.getsampwidth()
            rate = w.getframerate()
            comp = w.getcomptype()
            frames = w.readframes(w.getnframes())
    except wave.Error as exc:
        raise AudioFormatError(f"{path}: not a readable WAV file ({exc})") from exc
    if comp != "NONE":
        raise AudioFormatError(f"{path}: compressed WAV not supported")
    if channels != 1:
        raise AudioFormatError(f"{path}: expected mono, got {channels} channels")
    if width != 2:
        raise AudioFormatError(f"{path}: expected 16-bit samples, got {8 * width}-bit")
    if rate != SAMPLE_RATE:
        raise AudioFormatError(f"{path}: expected {SAMPLE_RATE} Hz, got {rate} Hz")
    return AudioClip(np.frombuffer(frames, dtype="<i2"))


def write_wav(path, clip: AudioClip):
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(clip.sample_rate)
        w.writeframes(clip.samples.astype("<i2").tobytes())

"""Audio ingestion and 80-dim log-mel filterbank extraction.

Framing is 25 ms windows with a 10 ms hop at 16 kHz (400/160 samples),
Hamming-windowed, 512-point DFT power spectrum, 80 triangular mel filters
on the HTK scale (2595*log10(1+f/700)) spanning 20 Hz to 7600 Hz, natural
log with a 1e-10 power floor.  No pre-emphasis, no dither, no mean
normalization.  Filters are area-unnormalized (unit peak).
"""

from __future__ import annotations

import wave
from dataclasses import dataclass, field

import numpy as np

from .errors import AudioFormatError, DimensionError

SAMPLE_RATE = 16000
WINDOW_SAMPLES = 400
HOP_SAMPLES = 160
NUM_FFT = 512
NUM_MEL_BINS = 80
MEL_LOW_HZ = 20.0
MEL_HIGH_HZ = 7600.0
POWER_FLOOR = 1e-10


@dataclass
class AudioSignal:
    """Mono waveform with samples in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise AudioFormatError("audio signal must be a non-empty 1-D array")
        if self.sample_rate <= 0:
            raise AudioFormatError(f"invalid sample rate {self.sample_rate}")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass
class FeatureMatrix:
    """80 x T log-mel filterbank energies for one utterance."""

    values: np.ndarray
    frame_shift_ms: int = 10
    frame_length_ms: int = 25

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] != NUM_MEL_BINS:
            raise DimensionError(
                f"feature matrix must be {NUM_MEL_BINS} x T, got {self.values.shape}"
            )

    @property
    def num_frames(self) -> int:
        return self.values.shape[1]


def read_wav(path) -> AudioSignal:
    """Load a RIFF/WAVE file: 16-bit PCM, mono, 16 kHz only.

    Integer samples are scaled by 1/32768, so -32768 maps to exactly -1.0.
    """
    try:
        with wave.open(str(path), "rb") as wav:
            channels = wav.getnchannels()
            width = wav.getsampwidth()
            rate = wav.getframerate()
            n = wav.getnframes()
            raw = wav.readframes(n)
    except FileNotFoundError:
        raise
    except (wave.Error, EOFError) as err:
        raise AudioFormatError(f"{path}: not a readable WAV file ({err})") from err
    if channels != 1:
        raise AudioFormatError(f"{path}: expected mono, got {channels} channels")
    if width != 2:
        raise AudioFormatError(f"{path}: expected 16-bit PCM, got {8 * width}-bit")
    if rate != SAMPLE_RATE:
        raise AudioFormatError(f"{path}: expected {SAMPLE_RATE} Hz, got {rate} Hz")
    if len(raw) < 2 * n:
        raise AudioFormatError(f"{path}: truncated data chunk")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if samples.size == 0:
        raise AudioFormatError(f"{path}: file contains no samples")
    return AudioSignal(samples, rate)


def write_wav(path, signal: AudioSignal) -> None:
    """Store a signal as 16-bit PCM mono (values clipped to [-1, 1))."""
    pcm = np.clip(np.round(signal.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(signal.sample_rate)
        wav.writeframes(pcm.tobytes())


def hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_filter_centers() -> np.ndarray:
    """Center frequencies (Hz) of the 80 triangular filters."""
    mel_points = np.linspace(hz_to_mel(MEL_LOW_HZ), hz_to_mel(MEL_HIGH_HZ),
                             NUM_MEL_BINS + 2)
    return mel_to_hz(mel_points)[1:-1]


def _mel_filterbank() -> np.ndarray:
    """(80, 257) triangular filters evaluated at the DFT bin frequencies."""
    mel_points = np.linspace(hz_to_mel(MEL_LOW_HZ), hz_to_mel(MEL_HIGH_HZ),
                             NUM_MEL_BINS + 2)
    hz_points = mel_to_hz(mel_points)
    bin_freqs = np.arange(NUM_FFT // 2 + 1) * (SAMPLE_RATE / NUM_FFT)
    filters = np.zeros((NUM_MEL_BINS, bin_freqs.size))
    for i in range(NUM_MEL_BINS):
        left, center, right = hz_points[i], hz_points[i + 1], hz_points[i + 2]
        up = (bin_freqs - left) / (center - left)
        down = (right - bin_freqs) / (right - center)
        filters[i] = np.maximum(0.0, np.minimum(up, down))
    return filters


_FILTERBANK = _mel_filterbank()
_WINDOW = np.hamming(WINDOW_SAMPLES)


def num_feature_frames(num_samples: int) -> int:
    if num_samples < WINDOW_SAMPLES:
        raise DimensionError(
            f"signal of {num_samples} samples is shorter than one "
            f"{WINDOW_SAMPLES}-sample window"
        )
    return 1 + (num_samples - WINDOW_SAMPLES) // HOP_SAMPLES


def compute_fbank(signal: AudioSignal) -> FeatureMatrix:
    """Extract the 80 x T log-mel feature matrix from a 16 kHz signal."""
    if signal.sample_rate != SAMPLE_RATE:
        raise AudioFormatError(
            f"feature extraction requires {SAMPLE_RATE} Hz input, got "
            f"{signal.sample_rate} Hz (no resampling)"
        )
    t = num_feature_frames(signal.samples.size)
    offsets = np.arange(t) * HOP_SAMPLES
    frames = signal.samples[offsets[:, None] + np.arange(WINDOW_SAMPLES)]
    spectrum = np.fft.rfft(frames * _WINDOW, n=NUM_FFT, axis=1)
    power = np.abs(spectrum) ** 2                            # (T, 257)
    mel_energy = power @ _FILTERBANK.T                       # (T, 80)
    values = np.log(np.maximum(mel_energy, POWER_FLOOR)).T
    return FeatureMatrix(values)


def crop_random(features: FeatureMatrix, num_frames: int,
                rng_seed: int) -> FeatureMatrix:
    """Take a contiguous ``num_frames`` crop at a uniformly random offset.

    Inputs shorter than ``num_frames`` are wrap-padded by repetition first.
    A fixed seed gives a fixed offset.
    """
    if num_frames <= 0:
        raise ValueError(f"crop length must be positive, got {num_frames}")
    values = features.values
    t = values.shape[1]
    if t < num_frames:
        reps = -(-num_frames // t)
        values = np.tile(values, (1, reps))[:, :num_frames]
        t = num_frames
    rng = np.random.default_rng(rng_seed)
    offset = int(rng.integers(0, t - num_frames + 1))
    return FeatureMatrix(values[:, offset:offset + num_frames].copy())

"""STFT engine: windowing, forward/inverse transforms, polar helpers.

All transforms run in float64. Spectrograms are time-major arrays of shape
(n_frames, n_bins) with n_bins = fft_size // 2 + 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

TWO_PI = 2.0 * np.pi

# Envelope floor below which overlap-add normalization is considered broken.
COLA_EPS = 1e-12


@dataclass(frozen=True)
class StftConfig:
    """Window/hop/FFT parameters shared by every transform in the toolkit."""

    win_length: int = 1024
    hop_length: int = 256
    fft_size: int = 2048
    sample_rate: int = 16000
    window_kind: str = "hann"

    def __post_init__(self):
        if min(self.win_length, self.hop_length, self.fft_size) <= 0:
            raise ValidationError("win/hop/fft must all be positive")
        if not (self.hop_length <= self.win_length <= self.fft_size):
            raise ValidationError(
                f"need hop <= win <= fft, got {self.hop_length}/{self.win_length}/{self.fft_size}"
            )
        if self.fft_size & (self.fft_size - 1):
            raise ValidationError(f"fft_size must be a power of two, got {self.fft_size}")
        if self.win_length % self.hop_length:
            raise ValidationError(
                f"win_length {self.win_length} must be a multiple of hop_length {self.hop_length}"
            )
        if self.sample_rate <= 0:
            raise ValidationError("sample_rate must be positive")
        if self.window_kind != "hann":
            raise ValidationError(f"unsupported window kind {self.window_kind!r}")

    @property
    def num_bins(self) -> int:
        return self.fft_size // 2 + 1

    @property
    def bin_hz(self) -> float:
        return self.sample_rate / self.fft_size


def make_window(config: StftConfig) -> np.ndarray:
    """Periodic Hann window: w[n] = 0.5 * (1 - cos(2*pi*n / win_length))."""
    n = np.arange(config.win_length, dtype=np.float64)
    return 0.5 * (1.0 - np.cos(TWO_PI * n / config.win_length))


def _reflect_indices(length: int, pad: int) -> np.ndarray:
    """Source index for each sample of a reflect-padded signal.

    Mirrors without repeating edge samples (period 2*length - 2), matching
    np.pad(..., mode="reflect") including the multi-bounce case pad >= length.
    """
    if length < 2:
        raise ValidationError("reflect padding needs at least 2 samples")
    idx = np.arange(-pad, length + pad)
    period = 2 * length - 2
    idx = np.remainder(idx, period)
    return np.where(idx >= length, period - idx, idx)


def frame_count(num_samples: int, config: StftConfig) -> int:
    return num_samples // config.hop_length


def _check_signal(samples: np.ndarray, config: StftConfig) -> np.ndarray:
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1:
        raise ValidationError(f"expected 1-D waveform, got shape {samples.shape}")
    if samples.size < config.hop_length:
        raise ValidationError(
            f"waveform of {samples.size} samples is shorter than hop {config.hop_length}"
        )
    if not np.all(np.isfinite(samples)):
        raise ValidationError("waveform contains NaN or Inf")
    return samples


def _frames(padded: np.ndarray, n_frames: int, config: StftConfig) -> np.ndarray:
    hop, win = config.hop_length, config.win_length
    starts = np.arange(n_frames) * hop
    return padded[starts[:, None] + np.arange(win)[None, :]]


def stft(samples: np.ndarray, config: StftConfig) -> np.ndarray:
    """Forward STFT.

    The signal is center-padded with win_length // 2 reflected samples per
    side; frame t starts at t * hop_length in the padded signal and the
    frame count is len(samples) // hop_length. Each windowed frame is
    zero-padded to fft_size and the nonnegative-frequency bins are kept.
    """
    samples = _check_signal(samples, config)
    n_frames = frame_count(samples.size, config)
    pad = config.win_length // 2
    padded = samples[_reflect_indices(samples.size, pad)]
    frames = _frames(padded, n_frames, config) * make_window(config)
    return np.fft.rfft(frames, n=config.fft_size, axis=1)


def istft(spec: np.ndarray, config: StftConfig) -> np.ndarray:
    """Inverse STFT by window-weighted overlap-add.

    Each row is Hermitian-extended and inverse-transformed; the first
    win_length samples are weighted by the window, overlap-added, and the
    sum is divided by the overlap-added squared-window envelope. Center
    padding is removed; the output has exactly n_frames * hop_length
    samples.
    """
    spec = np.asarray(spec, dtype=np.complex128)
    _check_spec(spec, config)
    n_frames = spec.shape[0]
    hop, win = config.hop_length, config.win_length
    pad = win // 2
    window = make_window(config)

    frames = np.fft.irfft(spec, n=config.fft_size, axis=1)[:, :win] * window

    total = n_frames * hop + 2 * pad
    out = np.zeros(total)
    env = np.zeros(total)
    wsq = window * window
    for t in range(n_frames):
        start = t * hop
        out[start:start + win] += frames[t]
        env[start:start + win] += wsq

    out = out[pad:pad + n_frames * hop]
    env = env[pad:pad + n_frames * hop]
    low = env.min(initial=np.inf)
    if low < COLA_EPS:
        raise ValidationError(
            f"overlap-add envelope dips to {low:.3e}; window/hop do not satisfy COLA"
        )
    return out / env


def stft_adjoint(cotangent: np.ndarray, config: StftConfig, num_samples: int) -> np.ndarray:
    """Adjoint of the stft linear map, for gradient backpropagation.

    Satisfies <stft(x), Y> = <x, stft_adjoint(Y, len(x))> under the real
    inner product sum(Re*Re + Im*Im). Unlike istft there is no envelope
    division; the reflect padding is folded back onto its source samples.
    """
    cot = np.asarray(cotangent, dtype=np.complex128)
    _check_spec(cot, config)
    n_frames = cot.shape[0]
    hop, win, nfft = config.hop_length, config.win_length, config.fft_size
    pad = win // 2
    if frame_count(num_samples, config) != n_frames:
        raise ValidationError(
            f"{num_samples} samples yield {frame_count(num_samples, config)} frames, "
            f"cotangent has {n_frames}"
        )

    # Adjoint of "keep bins 0..N/2 of a real-input DFT": place the retained
    # bins in a length-N spectrum (no Hermitian doubling) and take the real
    # part of the unnormalized inverse transform.
    full = np.zeros((n_frames, nfft), dtype=np.complex128)
    full[:, :config.num_bins] = cot
    frames = np.fft.ifft(full, axis=1).real * nfft
    frames = frames[:, :win] * make_window(config)

    grad_pad = np.zeros(num_samples + 2 * pad)
    for t in range(n_frames):
        start = t * hop
        grad_pad[start:start + win] += frames[t]

    grad = np.zeros(num_samples)
    np.add.at(grad, _reflect_indices(num_samples, pad), grad_pad)
    return grad


def _check_spec(spec: np.ndarray, config: StftConfig):
    if spec.ndim != 2 or spec.shape[1] != config.num_bins:
        raise ValidationError(
            f"expected spectrogram of shape (T, {config.num_bins}), got {spec.shape}"
        )


def polar(spec: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a complex spectrogram into (magnitude, principal phase).

    The phase of an exact zero is defined as 0 (np.angle convention),
    keeping downstream phase losses NaN-free.
    """
    spec = np.asarray(spec)
    return np.abs(spec), np.angle(spec)


def wrap_phase(x: np.ndarray) -> np.ndarray:
    """Map angles into the principal interval (-pi, pi]."""
    y = np.remainder(np.asarray(x, dtype=np.float64), TWO_PI)
    return np.where(y > np.pi, y - TWO_PI, y)


def instantaneous_frequency(phase: np.ndarray) -> np.ndarray:
    """Frame-to-frame wrapped phase difference, shape (T-1, F).

    The time step is one frame, so values are radians per hop.
    """
    phase = np.asarray(phase, dtype=np.float64)
    if phase.ndim != 2 or phase.shape[0] < 2:
        raise ValidationError("need at least two frames for a phase difference")
    return wrap_phase(np.diff(phase, axis=0))

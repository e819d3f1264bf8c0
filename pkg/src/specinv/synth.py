"""Deterministic synthetic test signals: tone mixtures and speech-like clips.

The toolkit has no bundled audio, so benchmarks and tests synthesize their
material. Speech-like clips are harmonic sources with gliding formant
envelopes, syllable gating, and fricative noise bursts; they exercise the
inverters the same way real speech does (harmonic peaks, moving spectral
envelope, noise segments) while staying fully reproducible.
"""

from __future__ import annotations

import numpy as np

from .dsp import TWO_PI, StftConfig


def tone_mixture(
    duration_s: float,
    sample_rate: int,
    freqs,
    amps,
    phases=None,
) -> np.ndarray:
    """Sum of constant sinusoids."""
    n = int(round(duration_s * sample_rate))
    t = np.arange(n) / sample_rate
    phases = np.zeros(len(freqs)) if phases is None else np.asarray(phases)
    out = np.zeros(n)
    for f, a, p in zip(freqs, amps, phases):
        out += a * np.sin(TWO_PI * f * t + p)
    return out


def random_tone_clip(
    rng: np.random.Generator,
    duration_s: float = 4.0,
    sample_rate: int = 16000,
    freq_band: tuple[float, float] = (350.0, 2800.0),
    max_tones: int = 3,
    noise_floor: float = 3e-3,
) -> np.ndarray:
    """One corpus clip: 1..max_tones random sinusoids, peak-safe amplitudes.

    A small broadband floor keeps the log-magnitude spectrum bounded;
    mathematically pure tones have pathologically deep spectral nulls that
    no real recording exhibits.
    """
    k = int(rng.integers(1, max_tones + 1))
    freqs = rng.uniform(*freq_band, size=k)
    amps = rng.uniform(0.12, 0.8 / max_tones, size=k)
    phases = rng.uniform(0.0, TWO_PI, size=k)
    clip = tone_mixture(duration_s, sample_rate, freqs, amps, phases)
    n = int(round(duration_s * sample_rate))
    return clip + noise_floor * rng.standard_normal(n)


def tone_corpus(
    seed: int,
    num_clips: int = 30,
    duration_s: float = 4.0,
    sample_rate: int = 16000,
    freq_band: tuple[float, float] = (350.0, 2800.0),
) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    return [
        random_tone_clip(rng, duration_s, sample_rate, freq_band)
        for _ in range(num_clips)
    ]


def _smooth_contour(rng: np.random.Generator, n: int, sample_rate: int,
                    rate_hz: float) -> np.ndarray:
    """Slow random modulation in [-1, 1] built from a few low-rate sinusoids."""
    t = np.arange(n) / sample_rate
    out = np.zeros(n)
    for _ in range(3):
        f = rng.uniform(0.3, rate_hz)
        out += rng.uniform(0.3, 1.0) * np.sin(TWO_PI * f * t + rng.uniform(0, TWO_PI))
    m = np.abs(out).max()
    return out / m if m > 0 else out


def speech_like_clip(
    seed: int,
    duration_s: float = 2.0,
    sample_rate: int = 16000,
) -> np.ndarray:
    """Speech-like signal: gliding-pitch harmonics under moving formants,
    syllable-rate voicing gates, and high-band noise in the gaps."""
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * sample_rate))
    t = np.arange(n) / sample_rate

    f0 = rng.uniform(95.0, 210.0) * (1.0 + 0.12 * _smooth_contour(rng, n, sample_rate, 2.5))
    inst_phase = TWO_PI * np.cumsum(f0) / sample_rate

    # Three formant resonances gliding across vowel-ish targets.
    centers = [rng.uniform(350, 850), rng.uniform(900, 2200), rng.uniform(2300, 3200)]
    widths = [120.0, 180.0, 250.0]
    glides = [_smooth_contour(rng, n, sample_rate, 1.5) for _ in centers]

    voiced = np.zeros(n)
    max_harm = int(6500.0 / f0.max())
    for k in range(1, max_harm + 1):
        fk = k * f0
        env = np.zeros(n)
        for (c, w, g) in zip(centers, widths, glides):
            fc = c * (1.0 + 0.25 * g)
            env += 1.0 / (1.0 + ((fk - fc) / w) ** 2)
        voiced += (env / k**0.5) * np.sin(k * inst_phase)
    voiced /= np.abs(voiced).max()

    # Syllable gate: raised-cosine envelope around 3-5 Hz.
    gate = 0.5 * (1.0 + np.sin(TWO_PI * rng.uniform(2.5, 4.5) * t + rng.uniform(0, TWO_PI)))
    gate = gate**1.5

    # Fricative-ish noise: white noise shaped toward the high band.
    noise = rng.standard_normal(n)
    spec = np.fft.rfft(noise)
    f_axis = np.fft.rfftfreq(n, 1.0 / sample_rate)
    spec *= 1.0 / (1.0 + np.exp(-(f_axis - 2500.0) / 400.0))
    noise = np.fft.irfft(spec, n=n)
    noise /= np.abs(noise).max()

    clip = voiced * gate + 0.25 * noise * (1.0 - gate)
    return 0.5 * clip / np.abs(clip).max()


def speech_like_corpus(
    seed: int,
    num_clips: int = 10,
    duration_s: float = 2.0,
    sample_rate: int = 16000,
) -> list[np.ndarray]:
    return [
        speech_like_clip(seed + i, duration_s, sample_rate)
        for i in range(num_clips)
    ]


def window_dtft_magnitude(config: StftConfig, omega: np.ndarray) -> np.ndarray:
    """|DTFT of the analysis window| at angular frequencies omega (rad/sample)."""
    from .dsp import make_window

    w = make_window(config)
    n = np.arange(config.win_length)
    return np.abs(np.exp(-1j * np.outer(omega, n)) @ w)


def tone_magnitude(
    config: StftConfig,
    freqs,
    amps,
    n_frames: int,
) -> np.ndarray:
    """Analytic magnitude spectrogram of steady sinusoids.

    Each tone of amplitude A contributes A/2 times the window's spectral
    lobe at +/- its frequency; rows are identical because the tones are
    stationary.
    """
    bins = TWO_PI * np.arange(config.num_bins) / config.fft_size
    row = np.zeros(config.num_bins)
    for f, a in zip(freqs, amps):
        w0 = TWO_PI * f / config.sample_rate
        row += 0.5 * a * (window_dtft_magnitude(config, bins - w0)
                          + window_dtft_magnitude(config, bins + w0))
    return np.tile(row, (n_frames, 1))

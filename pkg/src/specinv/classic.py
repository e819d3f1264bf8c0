"""Non-neural spectrogram inverters: Griffin-Lim, fast (momentum) GL, SPSI.

All three consume a magnitude spectrogram and produce a waveform via the
package's shared STFT engine. Everything here is deterministic given its
options (including the random-phase seed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dsp
from .dsp import TWO_PI, StftConfig
from .errors import ValidationError

# Floor for quadratic peak interpolation on log-magnitudes.
_LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class GlOptions:
    """Griffin-Lim controls.

    phase_init is "zero", "random" (uniform in (-pi, pi], driven by seed),
    or an explicit (T, F) phase matrix. momentum 0 is the classic
    algorithm; nonzero values give the fast variant (customary 0.99).
    """

    iterations: int = 50
    momentum: float = 0.0
    phase_init: object = "zero"
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 0:
            raise ValidationError("iterations must be >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValidationError("momentum must lie in [0, 1)")
        if isinstance(self.phase_init, str) and self.phase_init not in ("zero", "random"):
            raise ValidationError(f"unknown phase_init {self.phase_init!r}")


def _check_mag(mag: np.ndarray, config: StftConfig) -> np.ndarray:
    mag = np.asarray(mag, dtype=np.float64)
    if mag.ndim != 2 or mag.shape[1] != config.num_bins:
        raise ValidationError(
            f"expected magnitude spectrogram of shape (T, {config.num_bins}), got {mag.shape}"
        )
    if mag.size and (mag.min() < 0 or not np.all(np.isfinite(mag))):
        raise ValidationError("magnitudes must be finite and nonnegative")
    return mag


def _initial_phase(mag: np.ndarray, opts: GlOptions) -> np.ndarray:
    if isinstance(opts.phase_init, str):
        if opts.phase_init == "zero":
            return np.zeros_like(mag)
        rng = np.random.default_rng(opts.seed)
        return np.pi - rng.uniform(0.0, TWO_PI, size=mag.shape)
    phase = np.asarray(opts.phase_init, dtype=np.float64)
    if phase.shape != mag.shape:
        raise ValidationError(f"provided phase shape {phase.shape} != magnitude {mag.shape}")
    return phase


def _unit(spec: np.ndarray) -> np.ndarray:
    """Phasor of each entry; exact zeros map to 1 (phase 0)."""
    mag = np.abs(spec)
    safe = np.where(mag > 0.0, mag, 1.0)
    return np.where(mag > 0.0, spec / safe, 1.0)


def griffin_lim(
    mag: np.ndarray,
    config: StftConfig,
    opts: GlOptions = GlOptions(),
    residuals_out: list | None = None,
) -> np.ndarray:
    """Iterative phase reconstruction by alternating projection.

    Starting from c_0 = mag * exp(i * phase_init), each iteration
    resynthesizes and re-analyzes the magnitude-projected estimate:
    c_{i+1} = stft(istft(P(c_i))), where P replaces magnitudes with the
    target and keeps phases. With momentum mu > 0, P is applied to the
    extrapolation c_i + mu * (c_i - c_{i-1}) instead (c_{-1} = c_0).
    Returns istft(P(c_final)).

    If residuals_out is given, it is extended with one Frobenius residual
    ||mag - |stft(x_i)||_F per iteration, where x_i is the i-th waveform
    estimate; classic GL (momentum 0) makes this sequence non-increasing.
    """
    mag = _check_mag(mag, config)
    spec = mag * np.exp(1j * _initial_phase(mag, opts))
    projected = spec  # P(c_0) ≡ c_0: magnitude-consistent by construction
    for _ in range(opts.iterations):
        wave = dsp.istft(projected, config)
        new = dsp.stft(wave, config)
        if residuals_out is not None:
            residuals_out.append(float(np.linalg.norm(np.abs(new) - mag)))
        extrap = new + opts.momentum * (new - spec)
        spec = new
        projected = mag * _unit(extrap)
    if opts.iterations > 0:
        projected = mag * _unit(spec)
    return dsp.istft(projected, config)


def spsi_phases(mag: np.ndarray, config: StftConfig) -> np.ndarray:
    """Phase matrix of single-pass spectrogram inversion.

    Per frame: find local magnitude peaks, refine each peak's position by
    quadratic interpolation over the neighboring log-magnitudes, advance a
    running phase accumulator by 2*pi*(refined bin)*hop/fft at the peak,
    and lock every bin in the peak's region of influence (down to the
    surrounding magnitude troughs) to the peak's phase. Untouched bins
    carry their previous phase forward; frames without peaks change
    nothing.

    Locked bins follow the analysis convention's intrinsic phase ramp of
    -pi * win / fft per bin (the window's linear phase under the
    trailing-zero-pad DFT layout); without it, phase-locked regions
    cancel under overlap-add instead of reinforcing.
    """
    mag = _check_mag(mag, config)
    n_frames, n_bins = mag.shape
    hop = config.hop_length
    nfft = config.fft_size

    acc = np.zeros(n_bins)
    out = np.zeros_like(mag)
    log_mag = np.log(np.maximum(mag, _LOG_FLOOR))
    ramp = np.pi * config.win_length / nfft  # per-bin window phase slope

    for t in range(n_frames):
        m = mag[t]
        lm = log_mag[t]
        is_peak = np.zeros(n_bins, dtype=bool)
        if n_bins >= 3:
            is_peak[1:-1] = (m[1:-1] > m[:-2]) & (m[1:-1] > m[2:])
        for k in np.flatnonzero(is_peak):
            alpha, beta, gamma = lm[k - 1], lm[k], lm[k + 1]
            denom = alpha - 2.0 * beta + gamma
            offset = 0.5 * (alpha - gamma) / denom if denom != 0.0 else 0.0
            acc[k] = acc[k] + TWO_PI * (k + offset) * hop / nfft
            peak_phase = acc[k]
            j = k - 1
            while 0 <= j and m[j] < m[j + 1]:
                acc[j] = peak_phase + ramp * (k - j)
                j -= 1
            j = k + 1
            while j < n_bins and m[j] < m[j - 1]:
                acc[j] = peak_phase + ramp * (k - j)
                j += 1
        out[t] = acc
    return dsp.wrap_phase(out)


def spsi(mag: np.ndarray, config: StftConfig) -> np.ndarray:
    """Single deterministic pass: SPSI phases applied to the target magnitudes."""
    mag = _check_mag(mag, config)
    return dsp.istft(mag * np.exp(1j * spsi_phases(mag, config)), config)


def spsi_gl(mag: np.ndarray, config: StftConfig, opts: GlOptions = GlOptions()) -> np.ndarray:
    """Griffin-Lim seeded with the SPSI phase estimate.

    With 0 iterations this is bit-identical to spsi().
    """
    mag = _check_mag(mag, config)
    seeded = GlOptions(
        iterations=opts.iterations,
        momentum=opts.momentum,
        phase_init=spsi_phases(mag, config),
        seed=opts.seed,
    )
    return griffin_lim(mag, config, seeded)

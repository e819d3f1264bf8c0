"""Waveform-domain training losses and their gradients.

Four terms compare a reference waveform against an estimate through their
STFTs: spectral convergence, log-magnitude, instantaneous frequency, and
magnitude-weighted phase. Every term is differentiated analytically with
respect to the estimate's spectrogram; `total_loss_grad` chains those
cotangents through `dsp.stft_adjoint` to get the gradient w.r.t. samples.

L1-style terms are reduced by the full grid size (T*F entries, or
(T-1)*F for the instantaneous-frequency term) so loss weights are
duration-independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dsp
from .dsp import StftConfig
from .errors import ValidationError


@dataclass(frozen=True)
class LossWeights:
    """Coefficients of the four loss terms (defaults tuned for speech)."""

    sc: float = 1.0
    logmag: float = 6.0
    instfreq: float = 10.0
    wphase: float = 1.0

    def __post_init__(self):
        vals = (self.sc, self.logmag, self.instfreq, self.wphase)
        if any(v < 0 for v in vals):
            raise ValidationError("loss weights must be nonnegative")
        if not any(v > 0 for v in vals):
            raise ValidationError("at least one loss weight must be positive")


@dataclass(frozen=True)
class LossConfig:
    eps_log: float = 1e-5    # additive guard inside the log-magnitude term
    eps_grad: float = 1e-8   # magnitude floor for phase/magnitude derivatives
    reduction: str = "mean"

    def __post_init__(self):
        if self.eps_log <= 0 or self.eps_grad <= 0:
            raise ValidationError("loss epsilons must be positive")
        if self.reduction != "mean":
            raise ValidationError(f"unsupported reduction {self.reduction!r}")


@dataclass(frozen=True)
class LossBreakdown:
    sc: float
    logmag: float
    instfreq: float
    wphase: float
    total: float


def _mag_cotangent(spec: np.ndarray, dmag: np.ndarray, eps_grad: float) -> np.ndarray:
    """Chain d/d|z| into d/d(Re z, Im z), packed as a complex array."""
    mag = np.abs(spec)
    safe = np.where(mag > eps_grad, mag, 1.0)
    return np.where(mag > eps_grad, dmag * spec / safe, 0.0)


def _phase_cotangent(spec: np.ndarray, dphase: np.ndarray, eps_grad: float) -> np.ndarray:
    """Chain d/d(arg z) into d/d(Re z, Im z); zero below the magnitude floor."""
    mag2 = np.abs(spec) ** 2
    safe = np.where(mag2 > eps_grad * eps_grad, mag2, 1.0)
    return np.where(mag2 > eps_grad * eps_grad, dphase * 1j * spec / safe, 0.0)


# ---------------------------------------------------------------------------
# Per-term value + spectrogram-cotangent, on complex spectrogram pairs
# ---------------------------------------------------------------------------

# Magnitude floor for sc_spec (it takes no LossConfig; the guard only
# suppresses 0/0 at exactly-zero bins).
_SC_EPS = 1e-300


def sc_spec(ref: np.ndarray, est: np.ndarray, grad: bool = False):
    ref_mag = np.abs(ref)
    est_mag = np.abs(est)
    denom = np.linalg.norm(ref_mag)
    if denom == 0.0:
        raise ValidationError("spectral convergence undefined for a silent reference")
    diff = est_mag - ref_mag
    num = np.linalg.norm(diff)
    value = num / denom
    if not grad:
        return value
    if num == 0.0:
        return value, np.zeros_like(est)
    dmag = diff / (num * denom)
    return value, _mag_cotangent(est, dmag, _SC_EPS)


def log_mag_spec(ref: np.ndarray, est: np.ndarray, cfg: LossConfig, grad: bool = False):
    eps = cfg.eps_log
    ref_log = np.log(np.abs(ref) + eps)
    est_mag = np.abs(est)
    est_log = np.log(est_mag + eps)
    diff = est_log - ref_log
    value = np.abs(diff).mean()
    if not grad:
        return value
    dmag = np.sign(diff) / ((est_mag + eps) * diff.size)
    return value, _mag_cotangent(est, dmag, cfg.eps_grad)


def if_spec(ref: np.ndarray, est: np.ndarray, cfg: LossConfig, grad: bool = False):
    if ref.shape[0] < 2:
        raise ValidationError("instantaneous frequency needs at least two frames")
    ref_mag = np.abs(ref)
    est_mag = np.abs(est)
    d_ref = dsp.instantaneous_frequency(np.angle(ref))
    d_est = dsp.instantaneous_frequency(np.angle(est))
    # Phase is meaningless at near-silent bins; require both frames of both
    # signals to clear the floor before an entry counts.
    ok = (ref_mag > cfg.eps_grad) & (est_mag > cfg.eps_grad)
    mask = ok[1:] & ok[:-1]
    count = d_ref.size
    diff = d_est - d_ref
    value = np.abs(np.where(mask, diff, 0.0)).sum() / count
    if not grad:
        return value
    g = np.where(mask, np.sign(diff), 0.0) / count
    dphase = np.zeros(ref.shape)
    dphase[1:] += g
    dphase[:-1] -= g
    return value, _phase_cotangent(est, dphase, cfg.eps_grad)


def weighted_phase_spec(ref: np.ndarray, est: np.ndarray, cfg: LossConfig, grad: bool = False):
    ref_mag = np.abs(ref)
    est_mag = np.abs(est)
    inner = ref_mag * est_mag - ref.real * est.real - ref.imag * est.imag
    mask = (ref_mag > cfg.eps_grad) & (est_mag > cfg.eps_grad)
    count = inner.size
    value = np.abs(np.where(mask, inner, 0.0)).sum() / count
    if not grad:
        return value
    s = np.where(mask, np.sign(inner), 0.0) / count
    safe = np.where(mask, est_mag, 1.0)
    cot = s * (ref_mag * est / safe - ref)
    return value, np.where(mask, cot, 0.0)


def breakdown_spec(
    ref: np.ndarray,
    est: np.ndarray,
    weights: LossWeights,
    cfg: LossConfig,
    grad: bool = False,
):
    """All four terms (and optionally the combined cotangent) from one spectrogram pair."""
    if ref.shape != est.shape:
        raise ValidationError(f"spectrogram shapes differ: {ref.shape} vs {est.shape}")
    if grad:
        sc, g_sc = sc_spec(ref, est, grad=True)
        lm, g_lm = log_mag_spec(ref, est, cfg, grad=True)
        fi, g_fi = if_spec(ref, est, cfg, grad=True)
        wp, g_wp = weighted_phase_spec(ref, est, cfg, grad=True)
        cot = (weights.sc * g_sc + weights.logmag * g_lm
               + weights.instfreq * g_fi + weights.wphase * g_wp)
    else:
        sc = sc_spec(ref, est)
        lm = log_mag_spec(ref, est, cfg)
        fi = if_spec(ref, est, cfg)
        wp = weighted_phase_spec(ref, est, cfg)
        cot = None
    total = (weights.sc * sc + weights.logmag * lm
             + weights.instfreq * fi + weights.wphase * wp)
    bd = LossBreakdown(sc=sc, logmag=lm, instfreq=fi, wphase=wp, total=total)
    return (bd, cot) if grad else bd


# ---------------------------------------------------------------------------
# Waveform-level API
# ---------------------------------------------------------------------------

def _spec_pair(ref, est, config: StftConfig):
    ref = np.asarray(ref, dtype=np.float64)
    est = np.asarray(est, dtype=np.float64)
    if ref.shape != est.shape:
        raise ValidationError(f"waveform lengths differ: {ref.size} vs {est.size}")
    return dsp.stft(ref, config), dsp.stft(est, config)


def spectral_convergence(ref, est, config: StftConfig) -> float:
    ref_spec, est_spec = _spec_pair(ref, est, config)
    return float(sc_spec(ref_spec, est_spec))


def spectral_convergence_db(ref, est, config: StftConfig) -> float:
    """Spectral convergence in dB (20*log10); -inf for a perfect match."""
    value = spectral_convergence(ref, est, config)
    if value == 0.0:
        return float("-inf")
    return float(20.0 * np.log10(value))


def log_mag_loss(ref, est, config: StftConfig, loss_config: LossConfig = LossConfig()) -> float:
    ref_spec, est_spec = _spec_pair(ref, est, config)
    return float(log_mag_spec(ref_spec, est_spec, loss_config))


def if_loss(ref, est, config: StftConfig, loss_config: LossConfig = LossConfig()) -> float:
    ref_spec, est_spec = _spec_pair(ref, est, config)
    return float(if_spec(ref_spec, est_spec, loss_config))


def weighted_phase_loss(ref, est, config: StftConfig,
                        loss_config: LossConfig = LossConfig()) -> float:
    ref_spec, est_spec = _spec_pair(ref, est, config)
    return float(weighted_phase_spec(ref_spec, est_spec, loss_config))


def total_loss(ref, est, config: StftConfig,
               weights: LossWeights = LossWeights(),
               loss_config: LossConfig = LossConfig()) -> LossBreakdown:
    ref_spec, est_spec = _spec_pair(ref, est, config)
    return breakdown_spec(ref_spec, est_spec, weights, loss_config)


def total_loss_grad(ref, est, config: StftConfig,
                    weights: LossWeights = LossWeights(),
                    loss_config: LossConfig = LossConfig()) -> np.ndarray:
    """Gradient of total_loss with respect to the estimate's samples."""
    _, grad = total_loss_with_grad(ref, est, config, weights, loss_config)
    return grad


def total_loss_with_grad(ref, est, config: StftConfig,
                         weights: LossWeights = LossWeights(),
                         loss_config: LossConfig = LossConfig()):
    """(LossBreakdown, gradient) in one pass; the trainer's hot path."""
    est = np.asarray(est, dtype=np.float64)
    ref_spec, est_spec = _spec_pair(ref, est, config)
    bd, cot = breakdown_spec(ref_spec, est_spec, weights, loss_config, grad=True)
    return bd, dsp.stft_adjoint(cot, config, est.size)

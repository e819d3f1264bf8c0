"""Multi-head transposed-convolution waveform synthesizer.

Each head is a stack of 1-D transposed convolutions with ELU activations;
scaled head outputs are summed and passed through a scaled softsign
a*x / (1 + |b*x|). The stride product equals the STFT hop, so a (T, F)
magnitude spectrogram maps to exactly hop*T output samples regardless of
duration.

Forward, reverse-mode gradients, and the Adam trainer are implemented
directly on numpy arrays in float64; batching is a leading axis shared by
all core routines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import dsp, losses
from .dsp import StftConfig
from .errors import NumericError, ValidationError


def _default_channels(num_layers: int) -> tuple[int, ...]:
    # Halving channel counts down to 1, mirroring the 2x temporal upsampling.
    return tuple(2 ** (num_layers - l) for l in range(1, num_layers + 1))


@dataclass(frozen=True)
class McnnConfig:
    num_heads: int = 8
    num_layers: int = 8
    strides: tuple[int, ...] = ()
    widths: tuple[int, ...] = ()
    channels: tuple[int, ...] = ()
    input_channels: int = 1025
    input_scaling: str = "linear"

    def __post_init__(self):
        if self.num_heads < 1 or self.num_layers < 1:
            raise ValidationError("need at least one head and one layer")
        if not self.strides:
            object.__setattr__(self, "strides", (2,) * self.num_layers)
        if not self.widths:
            object.__setattr__(self, "widths", (13,) * self.num_layers)
        if not self.channels:
            object.__setattr__(self, "channels", _default_channels(self.num_layers))
        for name in ("strides", "widths", "channels"):
            seq = getattr(self, name)
            if len(seq) != self.num_layers:
                raise ValidationError(f"{name} must have {self.num_layers} entries, got {len(seq)}")
            if any(v < 1 for v in seq):
                raise ValidationError(f"{name} entries must be positive")
        if self.channels[-1] != 1:
            raise ValidationError("the final layer must end at one channel")
        if any(w < s for w, s in zip(self.widths, self.strides)):
            raise ValidationError("every filter width must be >= its stride")
        if self.input_channels < 1:
            raise ValidationError("input_channels must be positive")
        if self.input_scaling not in ("linear", "log"):
            raise ValidationError(f"unknown input_scaling {self.input_scaling!r}")

    @property
    def upsample_factor(self) -> int:
        return math.prod(self.strides)

    def layer_channels(self, layer: int) -> tuple[int, int]:
        """(c_in, c_out) of a 0-based layer index."""
        c_in = self.input_channels if layer == 0 else self.channels[layer - 1]
        return c_in, self.channels[layer]

    def validate_with_stft(self, stft_config: StftConfig):
        if self.upsample_factor != stft_config.hop_length:
            raise ValidationError(
                f"stride product {self.upsample_factor} must equal hop "
                f"{stft_config.hop_length} so frames map to hop-sized sample blocks"
            )
        if self.input_channels != stft_config.num_bins:
            raise ValidationError(
                f"input_channels {self.input_channels} != spectrogram bins "
                f"{stft_config.num_bins}"
            )


@dataclass
class McnnParams:
    """Trainable tensors; also reused as the container for their gradients.

    kernels[h][l] has shape (width, c_in, c_out); biases[h][l] is (c_out,).
    softsign_gain and softsign_scale are the output nonlinearity's two
    scalars, stored as 0-d arrays so optimizer updates are uniform.
    """

    kernels: list = field(default_factory=list)
    biases: list = field(default_factory=list)
    head_gains: np.ndarray = None
    softsign_gain: np.ndarray = None
    softsign_scale: np.ndarray = None

    def flat(self) -> list[np.ndarray]:
        """Canonical parameter order: head-major, layer-major, then scalars."""
        out = []
        for hk, hb in zip(self.kernels, self.biases):
            for k, b in zip(hk, hb):
                out.append(k)
                out.append(b)
        out.append(self.head_gains)
        out.append(self.softsign_gain)
        out.append(self.softsign_scale)
        return out

    def named_flat(self) -> list[tuple[str, np.ndarray]]:
        names = []
        for h in range(len(self.kernels)):
            for l in range(len(self.kernels[h])):
                names.append(f"head{h}/layer{l}/kernel")
                names.append(f"head{h}/layer{l}/bias")
        names += ["head_gains", "softsign_gain", "softsign_scale"]
        return list(zip(names, self.flat()))


def init_params(config: McnnConfig, seed: int) -> McnnParams:
    """Uniform fan-in initialization; every head gets independent draws.

    Values are generated in float32 precision (stored as float64) so a
    float32 checkpoint round trip is bit-exact for fresh parameters. Head
    gains start at 1/num_heads to keep the initial sum inside the
    softsign's linear region.
    """
    rng = np.random.default_rng(seed)
    kernels, biases = [], []
    for _ in range(config.num_heads):
        hk, hb = [], []
        for l in range(config.num_layers):
            c_in, c_out = config.layer_channels(l)
            w = config.widths[l]
            bound = math.sqrt(6.0 / (w * c_in))
            draw = rng.uniform(-bound, bound, size=(w, c_in, c_out))
            hk.append(draw.astype(np.float32).astype(np.float64))
            hb.append(np.zeros(c_out))
        kernels.append(hk)
        biases.append(hb)
    gain = np.float32(1.0 / config.num_heads)
    return McnnParams(
        kernels=kernels,
        biases=biases,
        head_gains=np.full(config.num_heads, gain, dtype=np.float64),
        softsign_gain=np.array(1.0),
        softsign_scale=np.array(1.0),
    )


def zeros_like_params(params: McnnParams) -> McnnParams:
    return McnnParams(
        kernels=[[np.zeros_like(k) for k in hk] for hk in params.kernels],
        biases=[[np.zeros_like(b) for b in hb] for hb in params.biases],
        head_gains=np.zeros_like(params.head_gains),
        softsign_gain=np.zeros_like(params.softsign_gain),
        softsign_scale=np.zeros_like(params.softsign_scale),
    )


# ---------------------------------------------------------------------------
# Transposed convolution
# ---------------------------------------------------------------------------

def _conv_forward(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray,
                  stride: int) -> np.ndarray:
    """Batched transposed conv: (B, T, c_in) -> (B, stride*T, c_out).

    Zero-insertion upsampling followed by full convolution; the w - stride
    excess samples are cropped symmetrically (one extra on the left when
    odd) so the output length is exactly stride * T.
    """
    batch, t_in, _ = x.shape
    width, _, c_out = kernel.shape
    t_out = stride * t_in
    full = np.zeros((batch, stride * (t_in - 1) + width, c_out))
    for r in range(width):
        full[:, r:r + t_out:stride] += x @ kernel[r]
    left = (width - stride + 1) // 2
    return full[:, left:left + t_out] + bias


def _conv_backward(x: np.ndarray, kernel: np.ndarray, stride: int,
                   upstream: np.ndarray):
    """Gradients of _conv_forward w.r.t. input, kernel, and bias."""
    batch, t_in, _ = x.shape
    width, _, c_out = kernel.shape
    t_out = stride * t_in
    left = (width - stride + 1) // 2
    d_full = np.zeros((batch, stride * (t_in - 1) + width, c_out))
    d_full[:, left:left + t_out] = upstream
    dx = np.zeros_like(x)
    dk = np.zeros_like(kernel)
    for r in range(width):
        tap = d_full[:, r:r + t_out:stride]
        dx += tap @ kernel[r].T
        dk[r] = np.tensordot(x, tap, axes=([0, 1], [0, 1]))
    return dx, dk, upstream.sum(axis=(0, 1))


def transposed_conv1d(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray,
                      stride: int) -> np.ndarray:
    """Single-item transposed conv: (T, c_in) -> (stride*T, c_out)."""
    x = np.asarray(x, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    if x.ndim != 2 or kernel.ndim != 3 or x.shape[1] != kernel.shape[1]:
        raise ValidationError(
            f"shape mismatch: input {x.shape} vs kernel {kernel.shape}"
        )
    if stride < 1 or kernel.shape[0] < stride:
        raise ValidationError("need width >= stride >= 1")
    return _conv_forward(x[None], kernel, np.asarray(bias, dtype=np.float64), stride)[0]


def _elu(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0.0, x, np.expm1(x))


def _elu_grad(pre: np.ndarray) -> np.ndarray:
    return np.where(pre > 0.0, 1.0, np.exp(pre))


# ---------------------------------------------------------------------------
# Forward / backward
# ---------------------------------------------------------------------------

def _check_input(config: McnnConfig, mag: np.ndarray, batched: bool) -> np.ndarray:
    mag = np.asarray(mag, dtype=np.float64)
    want = 3 if batched else 2
    if mag.ndim != want or mag.shape[-1] != config.input_channels:
        lead = "(B, T, " if batched else "(T, "
        raise ValidationError(
            f"expected input of shape {lead}{config.input_channels}), got {mag.shape}"
        )
    if not np.all(np.isfinite(mag)):
        raise NumericError("non-finite values in network input")
    if config.input_scaling == "log":
        mag = np.log1p(mag)
    return mag


def _forward_cached(params: McnnParams, config: McnnConfig, x: np.ndarray):
    """Batched forward pass keeping every intermediate needed by backward."""
    cache = {"inputs": [], "pres": [], "head_final": []}
    head_sum = None
    for h in range(config.num_heads):
        z = x
        h_inputs, h_pres = [], []
        for l in range(config.num_layers):
            h_inputs.append(z)
            pre = _conv_forward(z, params.kernels[h][l], params.biases[h][l],
                                config.strides[l])
            h_pres.append(pre)
            z = _elu(pre)
        final = z[..., 0]  # (B, T_wave); last layer has one channel
        cache["inputs"].append(h_inputs)
        cache["pres"].append(h_pres)
        cache["head_final"].append(final)
        contrib = params.head_gains[h] * final
        head_sum = contrib if head_sum is None else head_sum + contrib
    a = params.softsign_gain
    b = params.softsign_scale
    denom = 1.0 + np.abs(b * head_sum)
    out = a * head_sum / denom
    cache["head_sum"] = head_sum
    cache["denom"] = denom
    return out, cache


def _backward_cached(params: McnnParams, config: McnnConfig, cache: dict,
                     upstream: np.ndarray) -> McnnParams:
    grads = zeros_like_params(params)
    s = cache["head_sum"]
    denom = cache["denom"]
    a = float(params.softsign_gain)
    b = float(params.softsign_scale)

    # f(s) = a*s / (1 + |b*s|); sign(0) treated as 0 throughout.
    grads.softsign_gain[...] = np.sum(upstream * s / denom)
    grads.softsign_scale[...] = np.sum(
        upstream * (-a * s * np.abs(s) * np.sign(b)) / denom**2
    )
    d_sum = upstream * a / denom**2

    for h in range(config.num_heads):
        final = cache["head_final"][h]
        grads.head_gains[h] = np.sum(d_sum * final)
        dz = (d_sum * params.head_gains[h])[..., None]
        for l in reversed(range(config.num_layers)):
            dz = dz * _elu_grad(cache["pres"][h][l])
            dz, dk, db = _conv_backward(
                cache["inputs"][h][l], params.kernels[h][l], config.strides[l], dz
            )
            grads.kernels[h][l] += dk
            grads.biases[h][l] += db
    return grads


def mcnn_forward(params: McnnParams, config: McnnConfig, mag: np.ndarray) -> np.ndarray:
    """Spectrogram (T, F) -> waveform of upsample_factor * T samples."""
    x = _check_input(config, mag, batched=False)
    out, _ = _forward_cached(params, config, x[None])
    return out[0]


def mcnn_forward_batch(params: McnnParams, config: McnnConfig,
                       mags: np.ndarray) -> np.ndarray:
    x = _check_input(config, mags, batched=True)
    out, _ = _forward_cached(params, config, x)
    return out


def head_outputs(params: McnnParams, config: McnnConfig, mag: np.ndarray) -> list[np.ndarray]:
    """Per-head contributions (gain applied, pre-softsign).

    Summing them and applying the scaled softsign reproduces mcnn_forward.
    """
    x = _check_input(config, mag, batched=False)
    _, cache = _forward_cached(params, config, x[None])
    return [
        params.head_gains[h] * cache["head_final"][h][0]
        for h in range(config.num_heads)
    ]


def scaled_softsign(params: McnnParams, x: np.ndarray) -> np.ndarray:
    """The output nonlinearity on its own (for recombining head outputs)."""
    a = params.softsign_gain
    b = params.softsign_scale
    return a * x / (1.0 + np.abs(b * x))


def mcnn_backward(params: McnnParams, config: McnnConfig, mag: np.ndarray,
                  upstream: np.ndarray) -> McnnParams:
    """Gradients of sum(upstream * forward(mag)) for every parameter."""
    x = _check_input(config, mag, batched=False)
    upstream = np.asarray(upstream, dtype=np.float64)
    expected = config.upsample_factor * x.shape[0]
    if upstream.shape != (expected,):
        raise ValidationError(
            f"upstream must have shape ({expected},), got {upstream.shape}"
        )
    _, cache = _forward_cached(params, config, x[None])
    return _backward_cached(params, config, cache, upstream[None])


# ---------------------------------------------------------------------------
# Adam with stepped learning-rate decay
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 0.0005
    decay: float = 0.94
    decay_every: int = 5000
    batch_size: int = 16
    segment_frames: int = 64
    max_iters: int = 1000
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    eval_every: int = 200

    def __post_init__(self):
        if not 0.0 < self.decay <= 1.0:
            raise ValidationError("decay must lie in (0, 1]")
        if self.segment_frames < 2:
            raise ValidationError("segment_frames must be >= 2")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if self.lr0 <= 0 or self.decay_every < 1 or self.max_iters < 0:
            raise ValidationError("bad optimizer schedule")

    def learning_rate(self, iteration: int) -> float:
        return self.lr0 * self.decay ** (iteration // self.decay_every)


@dataclass
class AdamState:
    m: list
    v: list


def init_adam_state(params: McnnParams) -> AdamState:
    flat = params.flat()
    return AdamState(m=[np.zeros_like(p) for p in flat],
                     v=[np.zeros_like(p) for p in flat])


def adam_step(params: McnnParams, grads: McnnParams, state: AdamState,
              iteration: int, config: TrainConfig):
    """One bias-corrected Adam update, in place; returns (params, state)."""
    lr = config.learning_rate(iteration)
    b1, b2, eps = config.beta1, config.beta2, config.eps_adam
    t = iteration + 1
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for p, g, m, v in zip(params.flat(), grads.flat(), state.m, state.v):
        m[...] = b1 * m + (1.0 - b1) * g
        v[...] = b2 * v + (1.0 - b2) * g * g
        p[...] -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


# ---------------------------------------------------------------------------
# Trainer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IterRecord:
    iteration: int
    loss: losses.LossBreakdown
    lr: float


@dataclass
class TrainResult:
    params: McnnParams
    records: list
    eval_curve: list  # (iteration, held-out SC in dB)


def train(
    corpus: list,
    stft_config: StftConfig,
    mcnn_config: McnnConfig,
    train_config: TrainConfig,
    weights: losses.LossWeights = losses.LossWeights(),
    loss_config: losses.LossConfig = losses.LossConfig(),
    init_seed: int | None = None,
) -> TrainResult:
    """Adam-train the synthesizer on random fixed-length crops of a corpus.

    Every iteration samples batch_size segments of segment_frames * hop
    samples, drives the network with their magnitude spectrograms, and
    descends the weighted waveform loss against the ground-truth crops.
    Deterministic for a fixed seed: sampling, init, and the batched
    reductions all have a fixed order. The last clip is held out for the
    periodic SC(dB) probe when the corpus has more than one clip.
    """
    mcnn_config.validate_with_stft(stft_config)
    if not corpus:
        raise ValidationError("empty corpus")
    hop = stft_config.hop_length
    seg_len = train_config.segment_frames * hop
    clips = []
    for i, clip in enumerate(corpus):
        clip = np.asarray(clip, dtype=np.float64)
        if clip.size < seg_len:
            raise ValidationError(
                f"corpus clip {i} has {clip.size} samples; "
                f"needs >= {seg_len} (segment_frames * hop)"
            )
        clips.append(clip)

    train_clips = clips[:-1] if len(clips) > 1 else clips
    held_out = clips[-1]
    eval_len = min(held_out.size, 4 * seg_len)
    eval_wave = held_out[:eval_len]

    rng = np.random.default_rng(train_config.seed)
    params = init_params(mcnn_config, train_config.seed if init_seed is None else init_seed)
    state = init_adam_state(params)

    records: list[IterRecord] = []
    eval_curve: list[tuple[int, float]] = []
    bsz = train_config.batch_size
    n_frames = train_config.segment_frames

    for it in range(train_config.max_iters):
        batch = np.empty((bsz, seg_len))
        for bi in range(bsz):
            ci = int(rng.integers(0, len(train_clips)))
            off = int(rng.integers(0, train_clips[ci].size - seg_len + 1))
            batch[bi] = train_clips[ci][off:off + seg_len]

        mags = np.empty((bsz, n_frames, stft_config.num_bins))
        for bi in range(bsz):
            mags[bi] = np.abs(dsp.stft(batch[bi], stft_config))

        x = _check_input(mcnn_config, mags, batched=True)
        est, cache = _forward_cached(params, mcnn_config, x)

        upstream = np.empty_like(est)
        sums = np.zeros(5)
        for bi in range(bsz):
            bd, g = losses.total_loss_with_grad(
                batch[bi], est[bi], stft_config, weights, loss_config
            )
            upstream[bi] = g / bsz
            sums += (bd.sc, bd.logmag, bd.instfreq, bd.wphase, bd.total)
        sums /= bsz
        mean_bd = losses.LossBreakdown(*sums)
        if not np.isfinite(mean_bd.total):
            raise NumericError(f"non-finite loss at iteration {it}")

        grads = _backward_cached(params, mcnn_config, cache, upstream)
        adam_step(params, grads, state, it, train_config)
        records.append(IterRecord(it, mean_bd, train_config.learning_rate(it)))

        if train_config.eval_every and (it + 1) % train_config.eval_every == 0:
            eval_curve.append((it, _eval_sc_db(params, mcnn_config, stft_config, eval_wave)))

    return TrainResult(params=params, records=records, eval_curve=eval_curve)


def _eval_sc_db(params: McnnParams, config: McnnConfig, stft_config: StftConfig,
                wave: np.ndarray) -> float:
    mag = np.abs(dsp.stft(wave, stft_config))
    est = mcnn_forward(params, config, mag)
    return losses.spectral_convergence_db(wave[:est.size], est, stft_config)

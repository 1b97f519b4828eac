"""Desk-scale GPT-style forward pass with a pluggable linear-op backend.

All matrix products route through the backend (exact digital, or the
simulated optical pipeline); softmax, layernorm, ReLU6 and residual adds
are computed exactly in float64 (the hybrid scheme). No training, no
tokenization: inputs are raw n x d matrices.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .arch import ModelConfig
from .optics import LookupTable, NoiseSpec, derive_rng, derive_seed, optical_matmul

LN_EPS = 1e-5


@dataclass
class LayerWeights:
    qkv: np.ndarray       # (d, 3d)
    out_proj: np.ndarray  # (d, d)
    ff1: np.ndarray       # (d, 4d)
    ff2: np.ndarray       # (4d, d)
    ln1_gain: np.ndarray
    ln1_bias: np.ndarray
    ln2_gain: np.ndarray
    ln2_bias: np.ndarray


@dataclass
class TransformerWeights:
    config: ModelConfig
    seed: int
    layers: list[LayerWeights]


def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_weights(config: ModelConfig, seed: int = 0) -> TransformerWeights:
    """Xavier-uniform projection matrices, unit layernorm gains, zero biases."""
    d = config.d
    layers = []
    for layer_idx in range(config.L):
        rng = derive_rng(seed, layer_idx)
        layers.append(LayerWeights(
            qkv=_xavier(rng, d, 3 * d),
            out_proj=_xavier(rng, d, d),
            ff1=_xavier(rng, d, 4 * d),
            ff2=_xavier(rng, 4 * d, d),
            ln1_gain=np.ones(d), ln1_bias=np.zeros(d),
            ln2_gain=np.ones(d), ln2_bias=np.zeros(d),
        ))
    return TransformerWeights(config=config, seed=seed, layers=layers)


@dataclass
class ForwardTrace:
    post_attention: list[np.ndarray]  # per layer, after the attention residual
    post_ff: list[np.ndarray]         # per layer, after the FF residual
    final: np.ndarray                 # (n, d)

    def mean_abs(self) -> list[dict[str, float]]:
        return [
            {"post_attention": float(np.abs(a).mean()), "post_ff": float(np.abs(f).mean())}
            for a, f in zip(self.post_attention, self.post_ff)
        ]


class DigitalBackend:
    """Exact float64 matrix products."""

    def matmul(self, a, b, kind: str = "ff", op: int = 0) -> np.ndarray:
        return a @ b


class OpticalBackend:
    """Routes products through the simulated optical pipeline.

    Products are row-activation oriented (activations @ weights); the
    pipeline runs in the weights-left convention, so operands are transposed
    in and the result transposed back. With every non-ideality disabled
    (infinite photons, 0% systematic, no LUTs) the product is computed
    directly, keeping the noiseless trace identical to the digital backend.

    Per-product RNG streams derive from (seed, op-counter), so traces are
    reproducible regardless of scheduling or backend reuse.
    """

    def __init__(self, noise: NoiseSpec, input_lut: LookupTable | None = None,
                 weight_lut: LookupTable | None = None, seed: int | None = None):
        self.noise = noise
        self.input_lut = input_lut
        self.weight_lut = weight_lut
        self.seed = noise.seed if seed is None else seed

    def _noiseless(self) -> bool:
        return (math.isinf(self.noise.photons_per_mac)
                and self.noise.systematic_percent_ff == 0
                and self.noise.systematic_percent_attn == 0
                and self.input_lut is None and self.weight_lut is None)

    def matmul(self, a, b, kind: str = "ff", op: int = 0) -> np.ndarray:
        if self._noiseless():
            return a @ b
        out = optical_matmul(
            np.asarray(b).T, np.asarray(a).T, self.noise,
            input_lut=self.input_lut, weight_lut=self.weight_lut,
            seed=derive_rng(self.seed, op), kind=kind)
        return out.T


def _layernorm(x: np.ndarray, gain: np.ndarray, bias: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + LN_EPS) * gain + bias


def _softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _relu6(x: np.ndarray) -> np.ndarray:
    return np.clip(x, 0.0, 6.0)


def forward(config: ModelConfig, weights: TransformerWeights, x, backend=None) -> ForwardTrace:
    """Pre-norm block sequence: x += Attn(LN(x)); x += FF(LN(x))."""
    if backend is None:
        backend = DigitalBackend()
    x = np.asarray(x, dtype=float)
    if x.shape != (config.n, config.d):
        raise ValueError(f"input must be shape ({config.n}, {config.d}), got {x.shape}")
    d_h = config.head_dim
    op = 0
    post_attention, post_ff = [], []
    for layer in weights.layers:
        h = _layernorm(x, layer.ln1_gain, layer.ln1_bias)
        qkv = backend.matmul(h, layer.qkv, kind="ff", op=op); op += 1
        q, k, v = np.split(qkv, 3, axis=1)
        heads = []
        for head in range(config.h):
            sl = slice(head * d_h, (head + 1) * d_h)
            scores = backend.matmul(q[:, sl], k[:, sl].T, kind="attn", op=op); op += 1
            attn = _softmax(scores / math.sqrt(d_h))
            heads.append(backend.matmul(attn, v[:, sl], kind="attn", op=op)); op += 1
        context = np.concatenate(heads, axis=1)
        x = x + backend.matmul(context, layer.out_proj, kind="ff", op=op); op += 1
        post_attention.append(x.copy())

        h = _layernorm(x, layer.ln2_gain, layer.ln2_bias)
        f = backend.matmul(h, layer.ff1, kind="ff", op=op); op += 1
        f = _relu6(f)
        x = x + backend.matmul(f, layer.ff2, kind="ff", op=op); op += 1
        post_ff.append(x.copy())
    return ForwardTrace(post_attention=post_attention, post_ff=post_ff, final=x)


def make_input(config: ModelConfig, seed: int = 0) -> np.ndarray:
    """Seeded Gaussian n x d input at the embedding init scale."""
    return derive_rng(seed, 0xD0).normal(0.0, 0.02, size=(config.n, config.d))


def deviation(noisy: np.ndarray, clean: np.ndarray) -> float:
    """Mean |noisy - clean| relative to the mean magnitude of clean."""
    noisy = np.asarray(noisy, dtype=float)
    clean = np.asarray(clean, dtype=float)
    return float(np.abs(noisy - clean).mean() / (np.abs(clean).mean() + 1e-12))


def noise_sweep(config: ModelConfig, weights: TransformerWeights, x,
                ff_grid, attn_grid, photons: float = math.inf, seed: int = 0,
                input_lut: LookupTable | None = None,
                weight_lut: LookupTable | None = None) -> np.ndarray:
    """Deviation of the noisy forward vs the digital baseline, per grid cell.

    Returns a matrix indexed [ff][attn]; each cell uses an RNG stream
    derived from (seed, ff index, attn index), so cells are independent.
    """
    ff_grid = list(ff_grid)
    attn_grid = list(attn_grid)
    if not ff_grid or not attn_grid:
        raise ValueError("sweep grids must be non-empty")
    clean = forward(config, weights, x, DigitalBackend()).final
    surface = np.zeros((len(ff_grid), len(attn_grid)))
    for i, ff in enumerate(ff_grid):
        for j, attn in enumerate(attn_grid):
            noise = NoiseSpec(systematic_percent_ff=ff, systematic_percent_attn=attn,
                              photons_per_mac=photons, seed=derive_seed(seed, i, j))
            backend = OpticalBackend(noise, input_lut=input_lut, weight_lut=weight_lut)
            surface[i, j] = deviation(forward(config, weights, x, backend).final, clean)
    return surface


def trace_to_json_dict(trace: ForwardTrace, config: ModelConfig, seed: int) -> dict:
    return {
        "config": {"name": config.name, "n": config.n, "d": config.d,
                   "h": config.h, "L": config.L},
        "seed": seed,
        "post_attention": [a.tolist() for a in trace.post_attention],
        "post_ff": [a.tolist() for a in trace.post_ff],
        "final": trace.final.tolist(),
        "mean_abs": trace.mean_abs(),
    }


def save_trace(path: str | os.PathLike, trace: ForwardTrace, config: ModelConfig, seed: int) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(trace_to_json_dict(trace, config, seed), fh)
        fh.write("\n")


def load_trace(path: str | os.PathLike) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    for key in ("post_attention", "post_ff"):
        doc[key] = [np.asarray(a) for a in doc[key]]
    doc["final"] = np.asarray(doc["final"])
    return doc

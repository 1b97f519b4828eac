"""Transformer shape accounting: MAC counts, scalar traffic, hardware sizing.

Counts cover one forward pass over a full context of n tokens for a
decoder-style model with pre-norm blocks and a 4x feed-forward expansion.
Embedding/unembedding lookups are excluded; only block compute is billed.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass


@dataclass(frozen=True)
class ModelConfig:
    """Shape of one transformer model.

    Attributes:
        name: catalogue identifier.
        n: context length in tokens.
        d: model (embedding) dimension.
        h: number of attention heads.
        L: number of transformer layers.
    """

    name: str
    n: int
    d: int
    h: int
    L: int

    def __post_init__(self) -> None:
        for field in ("n", "d", "h", "L"):
            value = getattr(self, field)
            if not isinstance(value, int) or value <= 0:
                raise ValueError(f"{field} must be a positive integer, got {value!r}")

    @property
    def head_dim(self) -> int:
        # Only simulation needs the per-head split; a few published shape
        # tables contain h values that do not divide d, and those models can
        # still be costed (counting never splits heads).
        if self.d % self.h != 0:
            raise ValueError(f"d must be divisible by h: d={self.d}, h={self.h}")
        return self.d // self.h

    @property
    def param_count(self) -> int:
        # non-embedding weights per layer: qkv 3d^2 + out d^2 + ff1 4d^2 + ff2 4d^2
        return 12 * self.L * self.d * self.d


@dataclass(frozen=True)
class ProductCounts:
    """Per-layer scalar accounting for one matrix product class."""

    macs: int
    loads: int    # scalars sent through memory read + DAC + modulator
    detects: int  # scalars through detector + amplifier + ADC + memory write


# Matrix product classes in execution order within one layer.
PRODUCT_CLASSES = ("qkv", "attn_qk", "attn_av", "out_proj", "ff1", "ff2")

# Element-wise/digital function classes (run on the electronic side).
DIGITAL_CLASSES = ("softmax", "layernorm", "activation", "residual")


@dataclass(frozen=True)
class ComputeBreakdown:
    """Per-layer operation counts for one model, by product class.

    `products` and `digital_elements` hold counts for a single layer;
    totals multiply by `layers`.
    """

    layers: int
    products: dict[str, ProductCounts]
    digital_elements: dict[str, int]

    @property
    def macs_per_layer(self) -> int:
        return sum(p.macs for p in self.products.values())

    @property
    def total_macs(self) -> int:
        return self.layers * self.macs_per_layer

    @property
    def loads_per_layer(self) -> int:
        return sum(p.loads for p in self.products.values())

    @property
    def detects_per_layer(self) -> int:
        return sum(p.detects for p in self.products.values())

    @property
    def digital_elements_per_layer(self) -> int:
        return sum(self.digital_elements.values())

    def mac_fractions(self) -> dict[str, float]:
        total = self.macs_per_layer
        return {k: p.macs / total for k, p in self.products.items()}


def product_counts(n: int, d: int, k: int, weights_in_place: bool = False) -> ProductCounts:
    """Accounting for a generic product A(n x d) @ B(d x k).

    Both operands are loaded scalar by scalar (n*d + d*k loads) unless the
    right operand is a weight matrix kept resident on the modulator array,
    in which case only the left operand is loaded. Every output is detected.
    """
    loads = n * d + (0 if weights_in_place else d * k)
    return ProductCounts(macs=n * d * k, loads=loads, detects=n * k)


def compute_breakdown(config: ModelConfig) -> ComputeBreakdown:
    """Per-layer MAC and scalar-traffic counts for every product class.

    Weight matrices (qkv, out_proj, ff1, ff2) stay in place on the optical
    hardware, so only their activations are loaded. Both attention products
    stream two activation operands.
    """
    n, d, h = config.n, config.d, config.h
    products = {
        # fused QKV projection: (n x d) @ (d x 3d), weights in place
        "qkv": ProductCounts(macs=3 * n * d * d, loads=n * d, detects=3 * n * d),
        # per head Q K^T: h x [(n x d_h) @ (d_h x n)] = n^2 d MACs total,
        # both operands streamed
        "attn_qk": ProductCounts(macs=n * n * d, loads=2 * n * d, detects=h * n * n),
        # per head (softmax scores) V: h x [(n x n) @ (n x d_h)] = n^2 d MACs
        "attn_av": ProductCounts(macs=n * n * d, loads=h * n * n + n * d, detects=n * d),
        # output projection: (n x d) @ (d x d), weights in place
        "out_proj": ProductCounts(macs=n * d * d, loads=n * d, detects=n * d),
        # feed-forward up: (n x d) @ (d x 4d), weights in place
        "ff1": ProductCounts(macs=4 * n * d * d, loads=n * d, detects=4 * n * d),
        # feed-forward down: (n x 4d) @ (4d x d), weights in place
        "ff2": ProductCounts(macs=4 * n * d * d, loads=4 * n * d, detects=n * d),
    }
    digital = {
        "softmax": h * n * n,   # one element per attention score
        "layernorm": 2 * n * d,  # two norms per layer
        "activation": 4 * n * d,  # relu6 over the ff1 output
        "residual": 2 * n * d,   # two residual adds per layer
    }
    return ComputeBreakdown(layers=config.L, products=products, digital_elements=digital)


@dataclass(frozen=True)
class HardwareRequirements:
    """Steady-state hardware needed to run one model layer-by-layer."""

    input_vector_elements: int
    detectors: int
    mvm_cores: int
    sram_bytes: int


def hardware_requirements(config: ModelConfig, core_size: float = 1e7) -> HardwareRequirements:
    """Size the optical hardware for one model.

    The widest vectors moved in one step are the 4d-long feed-forward
    activations, so input modulators and detector counts are 4d. Core count
    assumes the largest weight block (d x 4d) is tiled over MVM cores of
    `core_size` weights each. SRAM holds the 4d x n activation tensor at one
    byte per scalar.
    """
    if core_size <= 0:
        raise ValueError(f"core_size must be positive, got {core_size}")
    d, n = config.d, config.n
    return HardwareRequirements(
        input_vector_elements=4 * d,
        detectors=4 * d,
        mvm_cores=math.ceil(4 * d * d / core_size),
        sram_bytes=4 * n * d,
    )


# Published decoder configurations: name -> (n, d, h, L).
_CATALOGUE_ROWS = [
    ("GPT2-117M", 1024, 768, 12, 12),
    ("GPT2-345M", 1024, 1024, 16, 24),
    ("GPT2-762M", 1024, 1280, 20, 36),
    ("GPT2-1.5B", 1024, 1600, 25, 48),
    ("Megatron-1.2B", 2048, 1536, 16, 40),
    ("Megatron-2.5B", 2048, 1920, 20, 54),
    ("Megatron-4.2B", 2048, 2304, 24, 64),
    ("Megatron-8.3B", 2048, 3072, 32, 72),
    ("GPT3-125M", 2048, 768, 12, 32),
    ("GPT3-350M", 2048, 1024, 16, 24),
    ("GPT3-760M", 2048, 1536, 16, 24),
    ("GPT3-1.3B", 2048, 2048, 24, 24),
    ("GPT3-2.7B", 2048, 2560, 32, 32),
    ("GPT3-6.7B", 2048, 4096, 32, 32),
    ("GPT3-13B", 2048, 5140, 40, 40),
    ("GPT3-175B", 2048, 12288, 96, 96),
    ("Turing-NLG-17B", 1024, 4256, 28, 78),
    ("MT-NLG-530B", 2048, 20480, 128, 105),
    ("Chinchilla-73M", 2048, 640, 10, 10),
    ("Chinchilla-305M", 2048, 1024, 16, 20),
    ("Chinchilla-552M", 2048, 1280, 10, 24),
    ("Chinchilla-1.1B", 2048, 1792, 14, 26),
    ("Chinchilla-1.6B", 2048, 2048, 16, 28),
    ("Chinchilla-6.8B", 2048, 3584, 28, 40),
    ("Chinchilla-70B", 2048, 8192, 64, 80),
    ("PaLM-like-8B", 2048, 4096, 16, 32),
    ("PaLM-like-62B", 2048, 8192, 32, 64),
    ("PaLM-like-540B", 2048, 18432, 48, 118),
    ("FUTURE-2.4T", 2048, 40960, 80, 120),
    ("FUTURE-16T", 2048, 81920, 128, 200),
    ("FUTURE-129T", 2048, 163840, 160, 400),
    ("FUTURE-4q", 2048, 655360, 512, 800),
]


def builtin_catalogue() -> list[ModelConfig]:
    """All built-in model configurations, smallest family first."""
    return [ModelConfig(name, n, d, h, L) for name, n, d, h, L in _CATALOGUE_ROWS]


def load_catalogue(path: str | os.PathLike) -> list[ModelConfig]:
    """Read a JSON catalogue: an array of {name, n, d, h, L} objects."""
    with open(path, encoding="utf-8") as fh:
        rows = json.load(fh)
    if not isinstance(rows, list):
        raise ValueError(f"catalogue must be a JSON array, got {type(rows).__name__}")
    configs = []
    for row in rows:
        try:
            configs.append(ModelConfig(row["name"], row["n"], row["d"], row["h"], row["L"]))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"bad catalogue row {row!r}: {exc}") from exc
    return configs


def save_catalogue(path: str | os.PathLike, configs: list[ModelConfig]) -> None:
    """Write a JSON catalogue in the same array-of-objects format."""
    rows = [{"name": c.name, "n": c.n, "d": c.d, "h": c.h, "L": c.L} for c in configs]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rows, fh, indent=2)
        fh.write("\n")


def find_model(name: str, catalogue: list[ModelConfig] | None = None) -> ModelConfig:
    """Look up a model by name (case-insensitive)."""
    configs = catalogue if catalogue is not None else builtin_catalogue()
    for config in configs:
        if config.name.lower() == name.lower():
            return config
    known = ", ".join(c.name for c in configs)
    raise KeyError(f"unknown model {name!r}; known models: {known}")

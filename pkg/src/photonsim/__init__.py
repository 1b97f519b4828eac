"""Simulator and cost model for Transformer inference on optical matmul hardware."""

__version__ = "0.1.0"

from .arch import (ComputeBreakdown, DIGITAL_CLASSES, HardwareRequirements, ModelConfig,
                   PRODUCT_CLASSES, ProductCounts, builtin_catalogue, compute_breakdown,
                   find_model, hardware_requirements, load_catalogue, product_counts,
                   save_catalogue)
from .optics import (EmaState, FourPassOperands, LookupTable, NoiseSpec, QuantizerSpec,
                     apply_shot_noise, apply_systematic_noise, derive_rng, derive_seed,
                     empirical_snr, four_pass_decompose, load_lut, lut_synthesize,
                     optical_matmul, quantize, recombine, save_lut)
from .txsim import (DigitalBackend, ForwardTrace, LayerWeights, OpticalBackend,
                    TransformerWeights, deviation, forward, init_weights, load_trace,
                    make_input, noise_sweep, save_trace, trace_to_json_dict)
from .energy import (CATEGORIES, ChunkingScenario, DIGITAL_BASELINES, EnergyReport,
                     HardwareProfile, LAYER_CLASSES, PhotonPolicy, advantage,
                     chunked_gpu_energy, chunked_onn_energy, clipped_policy,
                     default_policy, default_profile, electrical_energy, future_profile,
                     optical_energy, total_energy)

__all__ = [
    "__version__",
    # arch
    "ModelConfig", "ProductCounts", "ComputeBreakdown", "HardwareRequirements",
    "PRODUCT_CLASSES", "DIGITAL_CLASSES", "product_counts", "compute_breakdown",
    "hardware_requirements", "builtin_catalogue", "load_catalogue", "save_catalogue",
    "find_model",
    # optics
    "LookupTable", "QuantizerSpec", "EmaState", "NoiseSpec", "FourPassOperands",
    "lut_synthesize", "load_lut", "save_lut", "quantize", "four_pass_decompose",
    "recombine", "apply_shot_noise", "apply_systematic_noise", "optical_matmul",
    "empirical_snr", "derive_rng", "derive_seed",
    # txsim
    "LayerWeights", "TransformerWeights", "ForwardTrace", "DigitalBackend",
    "OpticalBackend", "init_weights", "make_input", "forward", "deviation",
    "noise_sweep", "trace_to_json_dict", "save_trace", "load_trace",
    # energy
    "HardwareProfile", "PhotonPolicy", "EnergyReport", "ChunkingScenario",
    "LAYER_CLASSES", "CATEGORIES", "DIGITAL_BASELINES", "default_profile",
    "future_profile", "default_policy", "clipped_policy", "electrical_energy",
    "optical_energy", "total_energy", "advantage", "chunked_onn_energy",
    "chunked_gpu_energy",
]

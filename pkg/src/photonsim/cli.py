"""Command-line interface.

Subcommands: energy, simulate, sweep, requirements, chunking, catalogue.
Every run writes its data files plus one manifest recording the resolved
inputs, atomically, with deterministic byte-stable formatting (floats at 9
significant digits, RFC-4180 CSV with LF line endings).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, fields

from . import __version__
from .arch import (ModelConfig, builtin_catalogue, compute_breakdown, find_model,
                   hardware_requirements, load_catalogue)
from .energy import (ChunkingScenario, DIGITAL_BASELINES, HardwareProfile, PhotonPolicy,
                     chunked_gpu_energy, chunked_onn_energy, default_policy,
                     default_profile, future_profile, total_energy)
from .optics import NoiseSpec, load_lut
from .txsim import (DigitalBackend, OpticalBackend, deviation, forward, init_weights,
                    make_input, noise_sweep, trace_to_json_dict)

DESK_SCALE_LIMIT = 2 ** 20  # max n*d simulate will materialize without --allow-large

CATALOGUE_ENV = "PHOTONSIM_CATALOGUE"


class CliError(Exception):
    def __init__(self, err_class: str, message: str, code: int = 1):
        super().__init__(message)
        self.err_class = err_class
        self.code = code


def _usage(message: str) -> CliError:
    return CliError("usage", message, code=2)


# --------------------------------------------------------------------------
# Deterministic serialization


def fmt(x: float) -> str:
    return f"{x:.9g}"


def _round_floats(obj):
    if isinstance(obj, float):
        return float(fmt(obj)) if math.isfinite(obj) else str(obj)
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str, obj) -> None:
    _atomic_write(path, json.dumps(_round_floats(obj), indent=2) + "\n")


def write_csv(path: str, header: list[str], rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) if isinstance(v, float) else v for v in row])
    _atomic_write(path, buf.getvalue())


def _timestamp() -> str:
    # honors SOURCE_DATE_EPOCH so archived runs can be byte-reproducible
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(epoch) if epoch else int(time.time())
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


@dataclass
class RunManifest:
    command: str
    seed: int
    resolved: dict
    outputs: list[str]
    version: str
    timestamp: str


def write_manifest(out_dir: str, command: str, seed: int, resolved: dict,
                   outputs: list[str]) -> str:
    manifest = RunManifest(command=command, seed=seed, resolved=_round_floats(resolved),
                           outputs=sorted(os.path.basename(p) for p in outputs),
                           version=__version__, timestamp=_timestamp())
    path = os.path.join(out_dir, f"{command}_manifest.json")
    write_json(path, manifest.__dict__)
    return path


# --------------------------------------------------------------------------
# Shared resolution


def _get_catalogue(args) -> tuple[list[ModelConfig], str]:
    env_path = os.environ.get(CATALOGUE_ENV)
    if env_path:
        try:
            return load_catalogue(env_path), env_path
        except (OSError, ValueError, json.JSONDecodeError) as exc:
            raise CliError("parse", f"catalogue file {env_path}: {exc}")
    return builtin_catalogue(), "builtin"


def _load_config_file(path: str) -> ModelConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        return ModelConfig(doc.get("name", os.path.basename(path)),
                           doc["n"], doc["d"], doc["h"], doc["L"])
    except FileNotFoundError as exc:
        raise CliError("io", f"config file {path}: {exc}")
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise CliError("parse", f"config file {path}: {exc}")


def _resolve_models(args, require_one: bool = False) -> tuple[list[ModelConfig], dict]:
    catalogue, source = _get_catalogue(args)
    if getattr(args, "all", False):
        return catalogue, {"models": "all", "catalogue": source}
    if getattr(args, "config", None):
        config = _load_config_file(args.config)
        return [config], {"models": [config.name], "config_file": args.config}
    if getattr(args, "model", None):
        try:
            config = find_model(args.model, catalogue)
        except KeyError as exc:
            raise CliError("unknown_model", str(exc.args[0]))
        return [config], {"models": [config.name], "catalogue": source}
    if require_one:
        raise _usage("provide --model NAME or --config FILE")
    raise _usage("provide --model NAME, --config FILE, or --all")


def _profile_from_args(args) -> tuple[HardwareProfile, dict]:
    resolved = {"profile": "default"}
    profile = default_profile()
    if args.profile:
        try:
            with open(args.profile, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError("parse", f"profile file {args.profile}: {exc}")
        known = {f.name for f in fields(HardwareProfile)}
        for key in doc:
            if key not in known:
                raise CliError("parse", f"profile file {args.profile}: unknown field '{key}'")
        try:
            profile = HardwareProfile(**doc)
        except (TypeError, ValueError) as exc:
            raise CliError("parse", f"profile file {args.profile}: {exc}")
        resolved["profile"] = args.profile
    if getattr(args, "future", False):
        profile = future_profile(profile)
        resolved["future"] = True
    return profile, resolved


def _policy_from_args(args) -> tuple[PhotonPolicy, dict]:
    if not args.policy:
        return default_policy(), {"policy": "default"}
    try:
        with open(args.policy, encoding="utf-8") as fh:
            policy = PhotonPolicy.from_json(fh.read())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError("parse", f"policy file {args.policy}: {exc}")
    except (TypeError, ValueError) as exc:
        raise CliError("parse", f"policy file {args.policy}: {exc}")
    return policy, {"policy": args.policy}


def _parse_float_list(text: str, flag: str) -> list[float]:
    items = [part.strip() for part in text.split(",") if part.strip()]
    if not items:
        raise _usage(f"{flag} must be a non-empty comma-separated list")
    try:
        return [float(v) for v in items]
    except ValueError as exc:
        raise _usage(f"{flag}: {exc}")


def _parse_int_list(text: str, flag: str) -> list[int]:
    return [int(v) for v in _parse_float_list(text, flag)]


def _parse_photons(text: str) -> float:
    if text.lower() in ("inf", "none", ""):
        return math.inf
    value = float(text)
    if not value > 0:
        raise _usage(f"--photons must be > 0 or 'inf', got {text}")
    return value


def _ensure_out(args) -> str:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _want(args, kind: str) -> bool:
    return args.format in (kind, "both")


# --------------------------------------------------------------------------
# Commands


def cmd_energy(args) -> list[str]:
    models, resolved = _resolve_models(args)
    profile, prof_res = _profile_from_args(args)
    policy, pol_res = _policy_from_args(args)
    resolved.update(prof_res)
    resolved.update(pol_res)
    baselines = dict(DIGITAL_BASELINES)
    if args.baseline is not None:
        baselines["custom"] = args.baseline
        resolved["baseline_j_per_mac"] = args.baseline

    out = _ensure_out(args)
    reports = [total_energy(m, profile, policy, baselines) for m in models]
    outputs = []
    if _want(args, "json"):
        path = os.path.join(out, "energy.json")
        write_json(path, [r.to_json_dict() for r in reports])
        outputs.append(path)
    if _want(args, "csv"):
        path = os.path.join(out, "energy.csv")
        rows = [row for r in reports for row in r.csv_rows()]
        write_csv(path, ["model", "layer_class", "category", "joules"], rows)
        outputs.append(path)
        summary = os.path.join(out, "energy_summary.csv")
        header = ["model", "n", "d", "h", "L", "params", "total_macs", "total_j"]
        header += [f"advantage_{name}" for name in baselines]
        rows = []
        for model, report in zip(models, reports):
            adv = report.advantages()
            rows.append([model.name, model.n, model.d, model.h, model.L,
                         model.param_count, report.total_macs, report.total()]
                        + [adv[name] for name in baselines])
        write_csv(summary, header, rows)
        outputs.append(summary)
    for model, report in zip(models, reports):
        adv = report.advantages()
        print(f"{model.name}: total {fmt(report.total())} J, "
              + ", ".join(f"{k} {fmt(v)}x" for k, v in adv.items()))
    outputs.append(write_manifest(out, "energy", args.seed, resolved, outputs))
    return outputs


def cmd_requirements(args) -> list[str]:
    models, resolved = _resolve_models(args)
    resolved["core_size"] = args.core_size
    out = _ensure_out(args)
    rows = []
    for model in models:
        req = hardware_requirements(model, args.core_size)
        rows.append([model.name, req.input_vector_elements, req.detectors,
                     req.mvm_cores, req.sram_bytes])
        print(f"{model.name}: {req.input_vector_elements} inputs, {req.detectors} detectors, "
              f"{req.mvm_cores} cores, {req.sram_bytes / 1e6:.4g} MB SRAM")
    outputs = []
    header = ["model", "input_vector_elements", "detectors", "mvm_cores", "sram_bytes"]
    if _want(args, "csv"):
        path = os.path.join(out, "requirements.csv")
        write_csv(path, header, rows)
        outputs.append(path)
    if _want(args, "json"):
        path = os.path.join(out, "requirements.json")
        write_json(path, [dict(zip(header, row)) for row in rows])
        outputs.append(path)
    outputs.append(write_manifest(out, "requirements", args.seed, resolved, outputs))
    return outputs


def cmd_chunking(args) -> list[str]:
    models, resolved = _resolve_models(args)
    profile, prof_res = _profile_from_args(args)
    policy, pol_res = _policy_from_args(args)
    memories = _parse_float_list(args.memory, "--memory")
    batches = _parse_float_list(args.batch, "--batch")
    if any(m <= 0 for m in memories):
        raise _usage("--memory values must be > 0")
    if any(b < 1 for b in batches):
        raise _usage("--batch values must be >= 1")
    resolved.update(prof_res)
    resolved.update(pol_res)
    resolved.update({"memory": memories, "batch": batches,
                     "dram_j_per_bit": args.dram_j_per_bit})

    out = _ensure_out(args)
    a100 = DIGITAL_BASELINES["a100"]
    rows = []
    for model in models:
        macs = compute_breakdown(model).total_macs
        for memory in memories:
            for batch in batches:
                scenario = ChunkingScenario(memory_capacity_weights=memory, batch_size=batch)
                onn = chunked_onn_energy(model, profile, policy, scenario).total()
                gpu = chunked_gpu_energy(model, a100, scenario, args.dram_j_per_bit)
                rows.append([model.name, memory, batch,
                             scenario.chunks(12 * model.d * model.d),
                             onn, gpu, macs * a100 / onn, gpu / onn])
    header = ["model", "memory_weights", "batch_size", "chunks",
              "onn_j", "gpu_chunked_j", "advantage_a100", "advantage_chunked_gpu"]
    outputs = []
    if _want(args, "csv"):
        path = os.path.join(out, "chunking.csv")
        write_csv(path, header, rows)
        outputs.append(path)
    if _want(args, "json"):
        path = os.path.join(out, "chunking.json")
        write_json(path, [dict(zip(header, row)) for row in rows])
        outputs.append(path)
    outputs.append(write_manifest(out, "chunking", args.seed, resolved, outputs))
    return outputs


def _luts_from_args(args) -> tuple:
    input_lut = weight_lut = None
    try:
        if args.input_lut:
            input_lut = load_lut(args.input_lut)
        if args.weight_lut:
            weight_lut = load_lut(args.weight_lut)
    except (OSError, ValueError) as exc:
        raise CliError("parse", f"LUT file: {exc}")
    return input_lut, weight_lut


def cmd_simulate(args) -> list[str]:
    models, resolved = _resolve_models(args, require_one=True)
    config = models[0]
    if config.n * config.d > DESK_SCALE_LIMIT and not args.allow_large:
        raise CliError(
            "over_limit",
            f"n*d = {config.n * config.d} exceeds the desk-scale limit {DESK_SCALE_LIMIT}; "
            f"simulation would materialize full weights (pass --allow-large to override)")
    input_lut, weight_lut = _luts_from_args(args)
    photons = _parse_photons(args.photons)
    noise = NoiseSpec(systematic_percent_ff=args.ff_noise,
                      systematic_percent_attn=args.attn_noise,
                      photons_per_mac=photons, seed=args.seed)
    resolved.update({"ff_noise": args.ff_noise, "attn_noise": args.attn_noise,
                     "photons": args.photons, "input_lut": args.input_lut,
                     "weight_lut": args.weight_lut})

    weights = init_weights(config, args.seed)
    x = make_input(config, args.seed)
    digital = forward(config, weights, x, DigitalBackend())
    optical = forward(config, weights, x,
                      OpticalBackend(noise, input_lut=input_lut, weight_lut=weight_lut))
    dev = deviation(optical.final, digital.final)

    out = _ensure_out(args)
    outputs = []
    for name, trace in (("digital", digital), ("optical", optical)):
        path = os.path.join(out, f"simulate_{name}_trace.json")
        write_json(path, trace_to_json_dict(trace, config, args.seed))
        outputs.append(path)
    summary = {
        "model": config.name, "seed": args.seed,
        "ff_noise_percent": args.ff_noise, "attn_noise_percent": args.attn_noise,
        "photons_per_mac": None if math.isinf(photons) else photons,
        "deviation": dev,
    }
    if _want(args, "json"):
        path = os.path.join(out, "simulate_deviation.json")
        write_json(path, summary)
        outputs.append(path)
    if _want(args, "csv"):
        path = os.path.join(out, "simulate_deviation.csv")
        write_csv(path, ["model", "ff_percent", "attn_percent", "seed", "deviation"],
                  [[config.name, float(args.ff_noise), float(args.attn_noise),
                    args.seed, dev]])
        outputs.append(path)
    print(f"{config.name}: deviation {fmt(dev)}")
    outputs.append(write_manifest(out, "simulate", args.seed, resolved, outputs))
    return outputs


def cmd_sweep(args) -> list[str]:
    models, resolved = _resolve_models(args, require_one=True)
    config = models[0]
    if config.n * config.d > DESK_SCALE_LIMIT and not args.allow_large:
        raise CliError(
            "over_limit",
            f"n*d = {config.n * config.d} exceeds the desk-scale limit {DESK_SCALE_LIMIT} "
            f"(pass --allow-large to override)")
    ff_grid = _parse_float_list(args.ff_grid, "--ff-grid")
    attn_grid = _parse_float_list(args.attn_grid, "--attn-grid")
    seeds = _parse_int_list(args.seeds, "--seeds")
    photons = _parse_photons(args.photons)
    input_lut, weight_lut = _luts_from_args(args)
    resolved.update({"ff_grid": ff_grid, "attn_grid": attn_grid, "seeds": seeds,
                     "photons": args.photons})

    weights = init_weights(config, args.seed)
    x = make_input(config, args.seed)
    rows = []
    for seed in seeds:
        surface = noise_sweep(config, weights, x, ff_grid, attn_grid,
                              photons=photons, seed=seed,
                              input_lut=input_lut, weight_lut=weight_lut)
        for i, ff in enumerate(ff_grid):
            for j, attn in enumerate(attn_grid):
                rows.append([ff, attn, seed, float(surface[i, j])])

    out = _ensure_out(args)
    outputs = []
    if _want(args, "csv"):
        path = os.path.join(out, "sweep.csv")
        write_csv(path, ["ff_percent", "attn_percent", "seed", "deviation"], rows)
        outputs.append(path)
    if _want(args, "json"):
        path = os.path.join(out, "sweep.json")
        write_json(path, [{"ff_percent": r[0], "attn_percent": r[1],
                           "seed": r[2], "deviation": r[3]} for r in rows])
        outputs.append(path)
    print(f"{config.name}: {len(rows)} sweep cells written")
    outputs.append(write_manifest(out, "sweep", args.seed, resolved, outputs))
    return outputs


def cmd_catalogue(args) -> list[str]:
    catalogue, source = _get_catalogue(args)
    out = _ensure_out(args)
    outputs = []
    rows = [[c.name, c.n, c.d, c.h, c.L, c.param_count] for c in catalogue]
    if _want(args, "json"):
        path = os.path.join(out, "catalogue.json")
        write_json(path, [{"name": c.name, "n": c.n, "d": c.d, "h": c.h, "L": c.L}
                          for c in catalogue])
        outputs.append(path)
    if _want(args, "csv"):
        path = os.path.join(out, "catalogue.csv")
        write_csv(path, ["name", "n", "d", "h", "L", "params"], rows)
        outputs.append(path)
    for row in rows:
        print(f"{row[0]}: n={row[1]} d={row[2]} h={row[3]} L={row[4]} params={row[5]}")
    outputs.append(write_manifest(out, "catalogue", args.seed,
                                  {"catalogue": source}, outputs))
    return outputs


# --------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="photonsim",
        description="Transformer inference simulator and cost model for optical accelerators")
    parser.add_argument("--version", action="version", version=f"photonsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, models=True):
        p.add_argument("--seed", type=int, default=0, help="RNG seed (u64)")
        p.add_argument("--out", default=None, help="output directory (default: cwd)")
        p.add_argument("--profile", default=None, help="hardware profile JSON file")
        p.add_argument("--policy", default=None, help="photon policy JSON file")
        p.add_argument("--format", choices=("json", "csv", "both"), default="both")
        if models:
            p.add_argument("--model", default=None, help="catalogue model name")
            p.add_argument("--config", default=None, help="model config JSON file")

    p = sub.add_parser("energy", help="per-inference energy report and advantage")
    common(p)
    p.add_argument("--all", action="store_true", help="sweep the full catalogue")
    p.add_argument("--future", action="store_true", help="apply the future-electronics profile")
    p.add_argument("--baseline", type=float, default=None,
                   help="extra digital baseline in J/MAC")
    p.set_defaults(handler=cmd_energy)

    p = sub.add_parser("requirements", help="hardware requirement table")
    common(p)
    p.add_argument("--all", action="store_true")
    p.add_argument("--core-size", type=float, default=1e7,
                   help="weights per MVM core (default 1e7)")
    p.set_defaults(handler=cmd_requirements)

    p = sub.add_parser("chunking", help="chunked weight-streaming advantage curves")
    common(p)
    p.add_argument("--all", action="store_true")
    p.add_argument("--memory", default="1e8", help="comma list of weight-memory capacities")
    p.add_argument("--batch", default="1", help="comma list of batch sizes")
    p.add_argument("--dram-j-per-bit", type=float, default=1e-12)
    p.set_defaults(handler=cmd_chunking)

    p = sub.add_parser("simulate", help="digital vs optical forward pass")
    common(p)
    p.add_argument("--ff-noise", type=float, default=0.0, help="systematic %% on FF products")
    p.add_argument("--attn-noise", type=float, default=0.0, help="systematic %% on attention products")
    p.add_argument("--photons", default="inf", help="photons per MAC, or 'inf'")
    p.add_argument("--input-lut", default=None, help="input LUT CSV")
    p.add_argument("--weight-lut", default=None, help="weight LUT CSV")
    p.add_argument("--allow-large", action="store_true", help="lift the desk-scale limit")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("sweep", help="noise-tolerance deviation surface")
    common(p)
    p.add_argument("--ff-grid", default="0,1,2,5", help="comma list of FF noise percents")
    p.add_argument("--attn-grid", default="0,1,2,5", help="comma list of attention noise percents")
    p.add_argument("--seeds", default="0", help="comma list of seeds")
    p.add_argument("--photons", default="inf")
    p.add_argument("--input-lut", default=None)
    p.add_argument("--weight-lut", default=None)
    p.add_argument("--allow-large", action="store_true")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("catalogue", help="list/export the model catalogue")
    common(p, models=False)
    p.set_defaults(handler=cmd_catalogue)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.handler(args)
    except CliError as exc:
        print(f"error:{exc.err_class}: {exc}", file=sys.stderr)
        return exc.code
    except (ValueError, KeyError, OSError) as exc:
        print(f"error:internal: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

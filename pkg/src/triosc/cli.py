"""Scenario runner: validated JSON configs in, CSV/JSON data out.

Every subcommand reads one config file, runs deterministically for a given
seed, writes its data files, and drops a manifest describing the run.  Data
files are byte-stable across repeated runs; the manifest additionally
records the wall-clock runtime.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from importlib.metadata import version as pkg_version
from pathlib import Path

import numpy as np
import jsonschema

from .errors import ConfigError, TrioscError
from .hilbert import (
    SystemParams,
    TruncationSpec,
    resonance_params,
    superposition_state,
)
from . import dynamics, drive, perturbation, optimize, rabi as rabi_mod
from .controllability import is_controllable, rabi_controllability

_NUMBER = {"type": "number"}
_STATE_TERM = {
    "type": "object",
    "properties": {
        "m": {"type": "integer", "enum": [-1, 0, 1]},
        "k": {"type": "integer", "minimum": 0},
        "l": {"type": "integer", "minimum": 0},
        "amp_re": _NUMBER,
        "amp_im": _NUMBER,
    },
    "required": ["m", "k", "l"],
    "additionalProperties": False,
}
_STATE = {
    "type": "object",
    "properties": {"terms": {"type": "array", "items": _STATE_TERM, "minItems": 1}},
    "required": ["terms"],
    "additionalProperties": False,
}
_GRID = {
    "type": "object",
    "properties": {
        "min": _NUMBER,
        "max": _NUMBER,
        "n": {"type": "integer", "minimum": 1},
        "spacing": {"type": "string", "enum": ["linear", "log"]},
    },
    "required": ["min", "max", "n"],
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "schema_version": {"type": "integer", "enum": [1]},
        "scenario": {"type": "string"},
        "system": {
            "type": "object",
            "properties": {
                "omega_b": _NUMBER,
                "resonance": {"type": "string", "enum": ["R1", "R2", "R1alt"]},
                "D": _NUMBER,
                "omega_z": _NUMBER,
                "g_a": _NUMBER,
                "g_b": _NUMBER,
                "alpha": {"type": "integer", "enum": [0, 1]},
                "theta_a": _NUMBER,
                "phi_a": _NUMBER,
                "theta_b": _NUMBER,
                "phi_b": _NUMBER,
                "gamma_b": _NUMBER,
            },
            "required": ["omega_b", "g_a", "g_b"],
            "additionalProperties": False,
        },
        "truncation": {
            "type": "object",
            "properties": {
                "n_a": {"type": "integer", "minimum": 2},
                "n_b": {"type": "integer", "minimum": 2},
            },
            "required": ["n_a", "n_b"],
            "additionalProperties": False,
        },
        "initial_state": _STATE,
        "target_state": _STATE,
        "simulate": {
            "type": "object",
            "properties": {
                "t_max": _NUMBER,
                "dt": _NUMBER,
                "store_every": {"type": "integer", "minimum": 1},
            },
            "required": ["t_max", "dt"],
            "additionalProperties": False,
        },
        "spectrum": {
            "type": "object",
            "properties": {"g_values": _GRID, "g_ratio": _NUMBER},
            "required": ["g_values", "g_ratio"],
            "additionalProperties": False,
        },
        "perturb": {
            "type": "object",
            "properties": {
                "omega_ratios": _GRID,
                "g_ratios": _GRID,
                "angles_only": {"type": "boolean"},
                "omega_ratio": _NUMBER,
                "g_ratio": _NUMBER,
            },
            "additionalProperties": False,
        },
        "drive": {
            "type": "object",
            "properties": {
                "amp_over_carrier": _NUMBER,
                "carrier": _NUMBER,
                "theta_c": _NUMBER,
                "t_max": _NUMBER,
                "samples_per_period": {"type": "integer", "minimum": 4},
            },
            "additionalProperties": False,
        },
        "drive_map": {
            "type": "object",
            "properties": {"theta_c": _GRID, "x": _GRID},
            "required": ["theta_c", "x"],
            "additionalProperties": False,
        },
        "grape": {
            "type": "object",
            "properties": {
                "duration": _NUMBER,
                "n_steps": {"type": "integer", "minimum": 2},
                "active_controls": {
                    "type": "array",
                    "items": {"type": "string", "enum": ["x", "y", "z"]},
                },
                "max_iters": {"type": "integer", "minimum": 1},
                "method": {"type": "string", "enum": ["ascent", "adam", "lbfgs"]},
                "init_amplitude": _NUMBER,
            },
            "required": ["duration", "n_steps"],
            "additionalProperties": False,
        },
        "envelope": {
            "type": "object",
            "properties": {
                "g_max": _NUMBER,
                "t_max": _NUMBER,
                "n_g": {"type": "integer", "minimum": 1},
                "n_t": {"type": "integer", "minimum": 2},
            },
            "required": ["g_max", "t_max"],
            "additionalProperties": False,
        },
        "robustness": {
            "type": "object",
            "properties": {
                "param_names": {"type": "array", "items": {"type": "string"}},
                "deltas": {"type": "array", "items": _NUMBER},
                "field_csv": {"type": "string"},
            },
            "additionalProperties": False,
        },
        "rabi": {
            "type": "object",
            "properties": {
                "m": {"type": "integer", "enum": [-1, 0, 1]},
                "k": {"type": "integer", "minimum": 0},
                "n": {"type": "integer", "minimum": 2},
                "g_over_omega": _GRID,
                "n_offsets": {"type": "array", "items": {"type": "integer"}},
            },
            "required": ["m", "k", "n", "g_over_omega", "n_offsets"],
            "additionalProperties": False,
        },
        "controllability": {
            "type": "object",
            "properties": {
                "model": {"type": "string", "enum": ["full", "rabi"]},
                "controls": {
                    "type": "array",
                    "items": {"type": "string", "enum": ["x", "y", "z"]},
                },
                "n_levels": {"type": "integer", "minimum": 2},
            },
            "additionalProperties": False,
        },
    },
    "required": ["schema_version", "scenario", "system", "truncation"],
    "additionalProperties": False,
}


def load_config(path: str) -> dict:
    """Parse and schema-validate a scenario config."""
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}")
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path}: at {where}: {exc.message}")
    return cfg


def system_from_config(cfg: dict) -> SystemParams:
    sc = dict(cfg["system"])
    resonance = sc.pop("resonance", None)
    if resonance is not None:
        d, omega_z = resonance_params(resonance, sc["omega_b"])
        sc.setdefault("D", d)
        sc.setdefault("omega_z", omega_z)
    if "D" not in sc or "omega_z" not in sc:
        raise ConfigError("system needs either a resonance preset or explicit D and omega_z")
    return SystemParams(**sc)


def trunc_from_config(cfg: dict) -> TruncationSpec:
    return TruncationSpec(**cfg["truncation"])


def state_from_config(trunc: TruncationSpec, spec: dict) -> np.ndarray:
    terms = [
        (t.get("amp_re", 1.0) + 1j * t.get("amp_im", 0.0), t["m"], t["k"], t["l"])
        for t in spec["terms"]
    ]
    return superposition_state(trunc, terms)


def grid_values(g: dict) -> np.ndarray:
    if g.get("spacing", "linear") == "log":
        return np.geomspace(g["min"], g["max"], g["n"])
    return np.linspace(g["min"], g["max"], g["n"])


def _require(cfg: dict, key: str) -> dict:
    if key not in cfg:
        raise ConfigError(f"subcommand needs a {key!r} section in the config")
    return cfg[key]


# ---------------------------------------------------------------------------
# Subcommand implementations (each returns a list of written files)
# ---------------------------------------------------------------------------

def run_simulate(cfg, outdir: Path, seed: int, threads: int = 1) -> list[str]:
    p = system_from_config(cfg)
    trunc = trunc_from_config(cfg)
    sim = _require(cfg, "simulate")
    psi0 = state_from_config(trunc, _require(cfg, "initial_state"))
    n_steps = int(round(sim["t_max"] / sim["dt"]))
    if "drive" in cfg:
        dr = cfg["drive"]
        drv = drive.SinusoidalDrive(
            amplitude=dr["amp_over_carrier"] * dr["carrier"],
            carrier=dr["carrier"],
            theta_c=dr.get("theta_c", math.pi / 2),
        )
        field = drive.sample_drive(drv, sim["t_max"], dr.get("samples_per_period", 64))
    else:
        field = dynamics.ControlField.zero(sim["dt"], n_steps)
    traj = dynamics.propagate(p, trunc, field, psi0, store_every=sim.get("store_every", 1))
    out = outdir / "trajectory.csv"
    dynamics.trajectory_to_csv(traj, trunc, out)
    if traj.leakage_flagged:
        print(
            f"warning: truncation leakage {traj.leakage_max:.2e} above threshold",
            file=sys.stderr,
        )
    return [str(out)]


def run_spectrum(cfg, outdir: Path, seed: int, threads: int = 1) -> list[str]:
    p = system_from_config(cfg)
    trunc = trunc_from_config(cfg)
    sp = _require(cfg, "spectrum")
    g_values = grid_values(sp["g_values"])
    scans = dynamics.spectrum_scan(p, trunc, g_values, sp["g_ratio"], threads=threads)
    out = outdir / "spectrum.csv"
    dynamics.spectrum_to_csv(scans, g_values, out)
    return [str(out)]


def run_perturb(cfg, outdir: Path, seed: int, threads: int = 1) -> list[str]:
    pt = _require(cfg, "perturb")
    files = []
    if pt.get("angles_only"):
        phi_a, phi_b, feig = perturbation.optimize_r2_angles(
            pt["omega_ratio"], pt["g_ratio"]
        )
        out = outdir / "r2_angles.json"
        with open(out, "w") as fh:
            json.dump(
                {"phi_a": phi_a, "phi_b": phi_b, "F_eig": feig,
                 "omega_ratio": pt["omega_ratio"], "g_ratio": pt["g_ratio"]},
                fh, indent=2, sort_keys=True,
            )
            fh.write("\n")
        files.append(str(out))
    else:
        omega_ratios = grid_values(pt["omega_ratios"])
        g_ratios = grid_values(pt["g_ratios"])
        f, pa, pb = perturbation.r2_fidelity_map(omega_ratios, g_ratios)
        out = outdir / "r2_map.csv"
        perturbation.r2_map_to_csv(omega_ratios, g_ratios, f, pa, pb, out)
        files.append(str(out))
    return files


def run_drive_map(cfg, outdir: Path, seed: int, threads: int = 1) -> list[str]:
    p = system_from_config(cfg)
    trunc = trunc_from_config(cfg)
    dm = _require(cfg, "drive_map")
    theta_vals = grid_values(dm["theta_c"])
    x_vals = grid_values(dm["x"])
    target = None
    if "target_state" in cfg:
        target = state_from_config(trunc, cfg["target_state"])
    fmap = drive.fidelity_map_drive(p, trunc, theta_vals, x_vals, target=target,
                                   threads=threads)
    out = outdir / "drive_map.csv"
    drive.drive_map_to_csv(theta_vals, x_vals, fmap, out)
    return [str(out)]


def run_grape(cfg, outdir: Path, seed: int, threads: int = 1) -> list[str]:
    p = system_from_config(cfg)
    trunc = trunc_from_config(cfg)
    gp = _require(cfg, "grape")
    prob = optimize.GrapeProblem(
        params=p,
        trunc=trunc,
        psi0=state_from_config(trunc, _require(cfg, "initial_state")),
        target=state_from_config(trunc, _require(cfg, "target_state")),
        duration=gp["duration"],
        n_steps=gp["n_steps"],
        active_controls=tuple(gp.get("active_controls", ["y", "z"])),
        max_iters=gp.get("max_iters", 500),
    )
    result = optimize.grape_optimize(
        prob,
        seed=seed,
        method=gp.get("method", "ascent"),
        init_amplitude=gp.get("init_amplitude", 1e-3),
    )
    field_csv = outdir / "field.csv"
    result_json = outdir / "grape_result.json"
    optimize.field_to_csv(result.field, field_csv)
    optimize.result_to_json(result, result_json, extra={"seed": seed})
    return [str(field_csv), str(result_json)]


def run_envelope(cfg, outdir: Path, seed: int, threads: int = 1) -> list[str]:
    p = system_from_config(cfg)
    trunc = trunc_from_config(cfg)
    env = _require(cfg, "envelope")
    psi0 = state_from_config(trunc, _require(cfg, "initial_state"))
    target = state_from_config(trunc, _require(cfg, "target_state"))
    grid = dynamics.EnvelopeGrid(
        n_g=env.get("n_g", 32), n_t=env.get("n_t", 512)
    )
    res = dynamics.no_control_envelope(
        p, trunc, psi0, target, env["g_max"], env["t_max"], grid
    )
    out = outdir / "envelope.json"
    with open(out, "w") as fh:
        json.dump(
            {"value": res.value, "g_at_max": res.g_at_max, "t_at_max": res.t_at_max,
             "g_max": env["g_max"], "t_max": env["t_max"]},
            fh, indent=2, sort_keys=True,
        )
        fh.write("\n")
    return [str(out)]


def run_robustness(cfg, outdir: Path, seed: int, threads: int = 1) -> list[str]:
    p = system_from_config(cfg)
    trunc = trunc_from_config(cfg)
    gp = _require(cfg, "grape")
    rb = cfg.get("robustness", {})
    prob = optimize.GrapeProblem(
        params=p,
        trunc=trunc,
        psi0=state_from_config(trunc, _require(cfg, "initial_state")),
        target=state_from_config(trunc, _require(cfg, "target_state")),
        duration=gp["duration"],
        n_steps=gp["n_steps"],
        active_controls=tuple(gp.get("active_controls", ["y", "z"])),
        max_iters=gp.get("max_iters", 500),
    )
    if "field_csv" in rb:
        raw = np.genfromtxt(rb["field_csv"], delimiter=",", skip_header=1)
        samples = raw[:, 1:4]
        field = dynamics.ControlField(dt=prob.dt, samples=samples, active_mask=prob.active_mask)
    else:
        result = optimize.grape_optimize(prob, seed=seed, method=gp.get("method", "ascent"))
        field = result.field
    table = optimize.robustness_scan(
        prob,
        field,
        param_names=tuple(rb.get("param_names", ["g_a", "g_b", "D", "omega_z"])),
        deltas=tuple(rb.get("deltas", [-0.1, -0.05, -0.02, 0.0, 0.02, 0.05, 0.1])),
    )
    out = outdir / "robustness.csv"
    with open(out, "w") as fh:
        fh.write("param,delta,fidelity_loss\n")
        for name, rows in table.items():
            for delta, loss in rows:
                fh.write(f"{name},{delta:.12g},{loss:.12g}\n")
    return [str(out)]


def run_rabi(cfg, outdir: Path, seed: int, threads: int = 1) -> list[str]:
    rb = _require(cfg, "rabi")
    out = outdir / "rabi_overlaps.csv"
    rabi_mod.overlap_grid_to_csv(
        rb["m"], rb["k"], 1.0, rb["n"], grid_values(rb["g_over_omega"]), rb["n_offsets"], out
    )
    return [str(out)]


def run_controllability(cfg, outdir: Path, seed: int, threads: int = 1) -> list[str]:
    p = system_from_config(cfg)
    trunc = trunc_from_config(cfg)
    cb = cfg.get("controllability", {})
    controls = tuple(cb.get("controls", ["x", "y", "z"]))
    if cb.get("model", "full") == "rabi":
        report = rabi_controllability(
            omega=p.omega_a,
            g=p.g_a,
            n_levels=cb.get("n_levels", trunc.n_a),
            D=p.D,
            omega_z=p.omega_z,
            controls=controls,
        )
    else:
        report = is_controllable(p, trunc, controls=controls)
    out = outdir / "controllability.json"
    report.to_json(out)
    return [str(out)]


_SUBCOMMANDS = {
    "simulate": run_simulate,
    "spectrum": run_spectrum,
    "perturb": run_perturb,
    "drive-map": run_drive_map,
    "grape": run_grape,
    "envelope": run_envelope,
    "robustness": run_robustness,
    "rabi": run_rabi,
    "controllability": run_controllability,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="triosc",
        description="Spin-1 / two-oscillator exchange toolkit scenario runner",
    )
    parser.add_argument("subcommand", choices=sorted(_SUBCOMMANDS))
    parser.add_argument("--config", required=True, help="scenario config (JSON)")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--threads",
        type=int,
        default=1,
        help="cap on worker threads for grid evaluations",
    )
    parser.add_argument(
        "--trunc-override",
        type=int,
        nargs=2,
        metavar=("N_A", "N_B"),
        help="override the config truncation",
    )
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.trunc_override:
            cfg["truncation"] = {
                "n_a": args.trunc_override[0],
                "n_b": args.trunc_override[1],
            }
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        files = _SUBCOMMANDS[args.subcommand](cfg, outdir, args.seed, max(args.threads, 1))
        runtime = time.perf_counter() - t0
        manifest = {
            "subcommand": args.subcommand,
            "scenario": cfg.get("scenario"),
            "config": cfg,
            "seed": args.seed,
            "threads": args.threads,
            "outputs": sorted(Path(f).name for f in files),
            "versions": {
                "triosc": pkg_version("triosc"),
                "numpy": np.__version__,
                "python": sys.version.split()[0],
            },
            "runtime_s": runtime,
        }
        with open(outdir / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except TrioscError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Config-driven experiment runner.

Subcommands ``validate`` and ``run`` take a JSON config; the presets ``rabi``,
``gate``, ``qec``, ``trotter``, ``grover``, ``tunnel`` and ``bath-rates`` run
the named experiment with built-in defaults, optionally overridden by a config.
Outputs are a CSV table plus a metadata JSON (and a schedule JSON where one is
compiled). Exit codes: 0 ok, 1 config error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import math
import os
import re
import sys
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import jsonschema

from . import __version__
from .units import convert

OUT_ENV = "MOLSPIN_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
PRESETS = ("rabi", "gate", "qec", "trotter", "grover", "tunnel", "bath-rates")
CANONICAL = {"frequency": "GHz", "time": "ns", "field": "T"}
FIELD_KINDS = {
    "B": "field", "rabi": "frequency", "detuning": "frequency", "J": "frequency", "J_diag": "frequency",
    "d": "frequency", "e": "frequency", "J1": "frequency", "J2": "frequency", "Gamma": "frequency",
    "G": "frequency", "b": "frequency", "D": "frequency", "E": "frequency", "nuclear_rabi": "frequency",
    "ancilla_rabi": "frequency", "t_max": "time", "tau": "time", "T1": "time", "T2": "time",
    "ancilla_T2": "time", "T_mem_max": "time",
}
_QUANTITY = re.compile(r"^\s*([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*(\S+)\s*$")


class ConfigError(Exception):
    def __init__(self, message: str, path: str = "", line: int | None = None):
        where = path or "/"
        if line is not None:
            where += f" (line {line})"
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line


# ---------------------------------------------------------------- config loading and validation


def load_schema() -> dict:
    return json.loads(resources.files("molspin").joinpath("schema/config.json").read_text())


def _pointer(path) -> str:
    return "/" + "/".join(str(p) for p in path) if path else ""


def _line_of(text: str, path) -> int | None:
    """Best-effort line of the innermost key named in ``path``."""
    keys = [p for p in path if isinstance(p, str)]
    pos = 0
    line = None
    for key in keys:
        m = re.compile(r'"' + re.escape(key) + r'"\s*:').search(text, pos)
        if not m:
            break
        pos = m.end()
        line = text.count("\n", 0, m.start()) + 1
    return line


def parse_config_text(text: str) -> dict:
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", "", exc.lineno) from None
    if not isinstance(cfg, dict):
        raise ConfigError("the config must be a JSON object")
    return cfg


def schema_errors(cfg: dict, text: str | None = None) -> list[ConfigError]:
    validator = jsonschema.Draft202012Validator(load_schema())
    out = []
    for err in sorted(validator.iter_errors(cfg), key=lambda e: list(map(str, e.absolute_path))):
        path = list(err.absolute_path)
        out.append(ConfigError(err.message, _pointer(path), _line_of(text, path) if text else None))
    return out


def quantity(value, kind: str, path: str, notes: list[str]) -> float:
    """Number in the canonical unit, or a ``"<value> <unit>"`` string converted to it."""
    if isinstance(value, bool):
        raise ConfigError("expected a quantity", path)
    if isinstance(value, (int, float)):
        return float(value)
    m = _QUANTITY.match(str(value))
    if not m:
        raise ConfigError(f"cannot parse quantity {value!r}", path)
    number, unit = float(m.group(1)), m.group(2)
    try:
        out = float(convert(number, unit, kind))
    except ValueError as exc:
        for other in CANONICAL:
            try:
                convert(number, unit, other)
            except ValueError:
                continue
            raise ConfigError(f"{unit!r} is a {other} unit but a {kind} is expected here", path) from None
        raise ConfigError(str(exc), path) from None
    if unit.lower() != CANONICAL[kind].lower():
        notes.append(f"{path}: {value} converted to {out:.10g} {CANONICAL[kind]}")
    return out


def resolve_units(node, notes: list[str], path: str = "", kind: str | None = None):
    """Copy of the config with every known quantity field converted to canonical units."""
    if isinstance(node, dict):
        out = {}
        for k, v in node.items():
            sub = f"{path}/{k}"
            if k in FIELD_KINDS and not (path == "/params" and k == "d"):  # grover d is a dimension
                out[k] = resolve_units(v, notes, sub, FIELD_KINDS[k])
            else:
                out[k] = resolve_units(v, notes, sub, None)
        return out
    if isinstance(node, list):
        return [resolve_units(v, notes, f"{path}/{i}", kind) for i, v in enumerate(node)]
    if kind is not None and not isinstance(node, bool):
        return quantity(node, kind, path, notes)
    return node


@dataclass
class LoadedConfig:
    raw: dict
    resolved: dict
    notes: list = field(default_factory=list)
    text: str = ""


def load_config(path: str | None, preset: str | None = None) -> LoadedConfig:
    if path is None:
        raw = {"experiment": preset}
        text = json.dumps(raw)
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}", "") from None
        raw = parse_config_text(text)
        if preset is not None:
            raw.setdefault("experiment", preset)
            if raw["experiment"] != preset:
                raise ConfigError(f"config declares experiment {raw['experiment']!r}, not {preset!r}", "/experiment",
                                  _line_of(text, ["experiment"]))
    errs = schema_errors(raw, text)
    if errs:
        raise errs[0]
    notes: list[str] = []
    try:
        resolved = resolve_units(raw, notes)
    except ConfigError as exc:
        if exc.line is None:
            keys = [int(k) if k.isdigit() else k for k in exc.path.strip("/").split("/") if k]
            line = _line_of(text, keys)
            if line is not None:
                raise ConfigError(str(exc).split(": ", 1)[1], exc.path, line) from None
        raise
    return LoadedConfig(raw, resolved, notes, text)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


# ---------------------------------------------------------------- results


@dataclass
class ResultTable:
    columns: list
    rows: list
    metadata: dict = field(default_factory=dict)
    schedule: str | None = None

    def __post_init__(self):
        widths = {len(r) for r in self.rows}
        if widths and widths != {len(self.columns)}:
            raise ValueError("every row must have one entry per column")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(x) for x in r])
        return buf.getvalue()


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    x = float(x)
    if x == 0:
        x = 0.0  # drop negative zero
    return format(x, ".12g")


def _p(cfg: dict) -> dict:
    return cfg.get("params", {}) or {}


def _grid(t_max: float, n: int):
    import numpy as np

    return np.linspace(0.0, t_max, n)


# ---------------------------------------------------------------- experiments


def run_spectrum(cfg: dict, seed: int) -> ResultTable:
    import numpy as np

    from .core import SpinRegister, SpinSite, eigendecompose
    from .hamiltonians import ExchangeTerm, HamiltonianSpec, ZeemanTerm, ZfsTerm

    reg = SpinRegister([SpinSite(s["s"], s.get("kind", "electronic"), s.get("label", f"s{k}"))
                        for k, s in enumerate(cfg["register"]["spins"])])
    terms = []
    for t in cfg["hamiltonian"]["terms"]:
        if t["type"] == "zeeman":
            terms.append(ZeemanTerm(t["site"], t.get("g", 2.0), t["B"], t.get("euler")))
        elif t["type"] == "exchange":
            terms.append(ExchangeTerm(tuple(t["sites"]), J_iso=t.get("J", 0.0),
                                      J_diag=tuple(t["J_diag"]) if "J_diag" in t else None))
        else:
            terms.append(ZfsTerm(t["site"], t.get("d", 0.0), t.get("e", 0.0)))
    try:
        h = HamiltonianSpec(reg, terms).build()
    except (IndexError, KeyError) as exc:
        raise ConfigError(f"unknown site {exc}", "/hamiltonian/terms") from None
    w, _ = eigendecompose(h)
    n = min(_p(cfg).get("levels", len(w)), len(w))
    return ResultTable(["level", "energy_GHz", "relative_GHz"], [[k, w[k], w[k] - w[0]] for k in range(n)],
                       {"dimension": int(h.shape[0])})


def run_rabi(cfg: dict, seed: int) -> ResultTable:
    import numpy as np

    from .core import SpinRegister
    from .open_system import NoiseModel, lindblad_exact
    from .units import MU_B_GHZ_PER_T

    p = _p(cfg)
    g, B = p.get("g", 2.0), p.get("B", 0.35)
    rabi, det = p.get("rabi", 0.02), p.get("detuning", 0.0)
    times = _grid(p.get("t_max", 200.0), p.get("n_points", 201))
    noise = cfg.get("noise", {})
    reg = SpinRegister([0.5])
    terms = NoiseModel(noise.get("T1"), noise.get("T2")).terms(reg)
    # frame rotating with the drive: H = -detuning s_z + rabi s_x
    sz = np.diag([0.5, -0.5]).astype(complex)
    sx = np.array([[0, 0.5], [0.5, 0]], dtype=complex)
    h = -det * sz + rabi * sx
    rho0 = np.diag([0.0, 1.0]).astype(complex)
    rows = []
    for t in times:
        rho = lindblad_exact(h, terms, rho0, t)
        p_up = float(np.real(rho[0, 0]))
        rows.append([t, 2 * p_up - 1, p_up])
    return ResultTable(["t_ns", "sigma_z", "p_up"], rows,
                       {"larmor_GHz": g * MU_B_GHZ_PER_T * B, "rabi_GHz": rabi, "detuning_GHz": det,
                        "frame": "rotating with the drive"})


def _trimer_spec(p: dict):
    from .hamiltonians import TrimerSpec

    ref = TrimerSpec.reference(p.get("B", 5.0))
    kw = {k: tuple(p[k]) for k in ("g1", "g2", "g3", "J1", "J2") if k in p}
    return TrimerSpec(**{**ref.__dict__, **kw})


def run_gate(cfg: dict, seed: int) -> ResultTable:
    import numpy as np

    from .pulses import (HardwareCalibration, analyze_photon_gate, analyze_trimer_gate, compile_cphase_photon,
                         compile_cphi_switch, compile_cz_switch, cphi_matrix, dressed_trimer, schedule_trace, uxy_gate, QUBIT_PROJECTIONS)

    p = _p(cfg)
    kind = p.get("kind", "cz")
    phi = p.get("phi", math.pi)
    if kind == "uxy":
        gamma = p.get("Gamma", 0.01)
        tau = p.get("tau", 1 / (4 * gamma))
        u = uxy_gate(gamma, tau)
        rows = [[f"{i:02b}", f"{j:02b}", u[i, j].real, u[i, j].imag] for i in range(4) for j in range(4)]
        return ResultTable(["out", "in", "re", "im"], rows, {"Gamma_GHz": gamma, "tau_ns": tau})
    if kind == "photon_cphase":
        from .hamiltonians import PhotonSpin, SpinPhotonSpec
        from .units import MU_B_GHZ_PER_T

        G = p.get("G", 0.01)
        spec = SpinPhotonSpec(12.0, (PhotonSpin(0.5, 2.0, 0.0), PhotonSpin(1.0, 2.0, 1.0)), (G, G), 5,
                              p.get("B", 9.8 / (2 * MU_B_GHZ_PER_T)))
        sched = compile_cphase_photon(spec, phi)
        rep = analyze_photon_gate(spec, sched)
        m = rep.block
        rows = [[f"{i:02b}", f"{j:02b}", m[i, j].real, m[i, j].imag] for i in range(4) for j in range(4)]
        meta = {"fidelity": rep.fidelity, "conditional_phase": rep.conditional_phase,
                "photon_residual": rep.photon_residual}
        return ResultTable(["out", "in", "re", "im"], rows, meta, sched.to_json())
    spec = _trimer_spec(p)
    hw = HardwareCalibration(rabi=p.get("rabi", 0.02))
    if kind == "cz":
        phi = math.pi
        sched = compile_cz_switch(spec, hw)
    else:
        sched = compile_cphi_switch(spec, phi, hw)
    spp = p.get("steps_per_period", 128)
    rep = analyze_trimer_gate(spec, sched, cphi_matrix(phi), steps_per_period=spp)
    dressed = dressed_trimer(spec)
    comp = dressed.computational()
    psi0 = comp @ np.full(4, 0.5, dtype=complex)
    times = _grid(sched.total_time, p.get("n_points", 51))
    states = schedule_trace(sched, dressed.H0, psi0, times, spec.register(), steps_per_period=spp)
    up = np.stack([dressed.state(a, 0.5, b) for a, b in QUBIT_PROJECTIONS], axis=1)
    rows = []
    for t, psi in zip(times, states):
        pops = np.abs(comp.conj().T @ psi) ** 2
        rows.append([t, *pops, float(np.sum(np.abs(up.conj().T @ psi) ** 2))])
    meta = {"fidelity": rep.fidelity, "conditional_phase": rep.conditional_phase,
            "switch_excitation": rep.switch_excitation, "leakage": rep.leakage,
            "state_phases": [float(x) for x in rep.state_phases]}
    return ResultTable(["t_ns", "P00", "P01", "P10", "P11", "P_switch"], rows, meta, sched.to_json())


def run_qec(cfg: dict, seed: int) -> ResultTable:
    import numpy as np

    from .qec import QuditHardware, qec_memory_experiment

    p = _p(cfg)
    base = QuditHardware.default(1.5)
    hw = QuditHardware(base.spec, p.get("nuclear_rabi", base.nuclear_rabi), p.get("ancilla_rabi", base.ancilla_rabi))
    T2 = p.get("T2", 1e5)
    T_mem = np.linspace(0.0, p.get("T_mem_max", 0.6 * T2), p.get("n_points", 25))
    curve = qec_memory_experiment(T_mem, T2, hw, ancilla_T2=p.get("ancilla_T2"), pulse_noise=p.get("pulse_noise", True))
    rows = [[t, c, r] for t, c, r in zip(curve.T_mem, curve.corrected, curve.reference)]
    return ResultTable(["T_mem", "E_corrected", "E_reference"], rows,
                       {"T2_ns": T2, "crossing_T_over_T2": curve.crossing()})


def run_trotter(cfg: dict, seed: int) -> ResultTable:
    from .algorithms.trotter import TfimSpec, tfim_trace

    p = _p(cfg)
    spec = TfimSpec(p.get("b", 1.0), p.get("J", 1.0), p.get("n_spins", 2))
    times = _grid(p.get("t_max", 1.0), p.get("n_points", 41))
    exact = tfim_trace(spec, times, None)
    trot = tfim_trace(spec, times, p.get("n_steps", 10), p.get("order", 1))
    rms = float(math.sqrt(sum((a - b) ** 2 for a, b in zip(exact, trot)) / len(times)))
    return ResultTable(["t_ns", "sigma_z_exact", "sigma_z_trotter"], [list(r) for r in zip(times, exact, trot)],
                       {"rms_deviation": rms})


def run_grover(cfg: dict, seed: int) -> ResultTable:
    from .algorithms.grover import GroverSpec, grover_qudit

    p = _p(cfg)
    d = p.get("d", 3)
    marked = p.get("marked", 0)
    if marked >= d:
        raise ConfigError("marked must be below d", "/params/marked")
    spec = GroverSpec.from_qudit(d, marked)
    res = grover_qudit(spec, p.get("mode", "pulse"), seed=seed, restarts=p.get("restarts", 4))
    n = len(res.populations)
    stage1 = list(res.stage1_populations) + [0.0] * (n - len(res.stage1_populations))
    rows = [[k, stage1[k], res.populations[k]] for k in range(n)]
    return ResultTable(["level", "stage1_population", "final_population"], rows, {"parameters": res.parameters},
                       res.schedule.to_json() if res.schedule else None)


def run_tunnel(cfg: dict, seed: int) -> ResultTable:
    from .algorithms.tunneling import TunnelingSpec, tunneling_period, tunneling_simulation

    p = _p(cfg)
    spec = TunnelingSpec(p.get("S", 1.0), p.get("D", -1.0), p.get("E", 0.05))
    times = _grid(p.get("t_max", 30.0), p.get("n_points", 301))
    tr = tunneling_simulation(spec, times, p.get("mode", "exact"))
    return ResultTable(["t_ns", "Sz"], [[t, v] for t, v in zip(tr.times, tr.sz)],
                       {"period_ns": tunneling_period(spec), "rotations_per_step": tr.rotations_per_step})


def run_bath_rates(cfg: dict, seed: int) -> ResultTable:
    from .open_system import BathCoupling, cluster_bath_rates, double_tetrahedron_geometry, random_nuclear_bath

    p = _p(cfg)
    nuclei = random_nuclear_bath(p.get("n_nuclei", 40), seed=seed + 1)
    bath = BathCoupling.from_geometry(double_tetrahedron_geometry(), nuclei, 2.0, 5.58, p.get("c0", 1.0))
    rows = []
    worst = {}
    for kind in ("ferro", "competing"):
        r = cluster_bath_rates(kind, bath, B=p.get("B", 0.001), levels=p.get("levels", 8))
        worst[kind] = r.worst
        n = r.rates.shape[0]
        rows += [[kind, mu, nu, r.rates[mu, nu]] for mu in range(n) for nu in range(mu + 1, n)]
    return ResultTable(["coupling", "mu", "nu", "gamma_per_ns"], rows, {"worst_rate": worst})


RUNNERS = {
    "spectrum": run_spectrum, "rabi": run_rabi, "gate": run_gate, "qec": run_qec, "trotter": run_trotter,
    "grover": run_grover, "tunnel": run_tunnel, "bath-rates": run_bath_rates,
}


# ---------------------------------------------------------------- physics sanity checks


def sanity(cfg: dict) -> list[str]:
    """Warnings that do not block a run (selectivity bandwidth, parameter regimes)."""
    from .pulses import CompilationError

    out = []
    exp = cfg["experiment"]
    p = _p(cfg)
    try:
        if exp == "gate" and p.get("kind", "cz") in ("cz", "cphi"):
            from .pulses import HardwareCalibration, compile_cphi_switch

            compile_cphi_switch(_trimer_spec(p), p.get("phi", math.pi), HardwareCalibration(rabi=p.get("rabi", 0.02)))
        elif exp == "qec":
            from .qec import QuditHardware, Spin32Code

            base = QuditHardware.default(1.5)
            Spin32Code(QuditHardware(base.spec, p.get("nuclear_rabi", base.nuclear_rabi),
                                     p.get("ancilla_rabi", base.ancilla_rabi))).stages
        elif exp == "rabi":
            from .units import MU_B_GHZ_PER_T

            if p.get("rabi", 0.02) > 0.1 * p.get("g", 2.0) * MU_B_GHZ_PER_T * p.get("B", 0.35):
                out.append("warning: Rabi frequency exceeds 10% of the Larmor frequency; the rotating-wave picture is poor")
    except CompilationError as exc:
        out.append(f"warning: {exc}")
    return out


# ---------------------------------------------------------------- entry points


def _write_outputs(table: ResultTable, out_dir: Path, prefix: str, meta: dict) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / f"{prefix}.csv", out_dir / f"{prefix}.meta.json"]
    paths[0].write_text(table.to_csv())
    paths[1].write_text(json.dumps(meta, indent=2, sort_keys=True, default=_json_default) + "\n")
    if table.schedule is not None:
        paths.append(out_dir / f"{prefix}.schedule.json")
        paths[-1].write_text(table.schedule + "\n")
    return paths


def _json_default(x):
    if hasattr(x, "tolist"):
        return x.tolist()
    if isinstance(x, complex):
        return [x.real, x.imag]
    raise TypeError(f"cannot serialize {type(x).__name__}")


def execute(loaded: LoadedConfig, out: str | None, seed: int | None) -> list[Path]:
    import numpy as np
    import scipy

    cfg = loaded.resolved
    seed = seed if seed is not None else cfg.get("seed", 0)
    exp = cfg["experiment"]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        table = RUNNERS[exp](cfg, seed)
    meta = {
        "experiment": exp,
        "config_hash": config_hash(loaded.raw),
        "config": loaded.raw,
        "seed": seed,
        "versions": {"molspin": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        "columns": table.columns,
        "results": table.metadata,
        "unit_notes": loaded.notes,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    out_dir = Path(out or cfg.get("output", {}).get("dir") or os.environ.get(OUT_ENV) or "out")
    prefix = cfg.get("output", {}).get("prefix", exp)
    return _write_outputs(table, out_dir, prefix, meta)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="molspin", description="Molecular spin qubit and qudit experiments.")
    ap.add_argument("--version", action="version", version=f"molspin {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required):
        p.add_argument("--config", required=config_required, help="JSON experiment config")
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./out)")
        p.add_argument("--seed", type=int, help="random seed (overrides the config)")
        p.add_argument("--threads", type=int, help="BLAS/OpenMP thread count")

    common(sub.add_parser("validate", help="check a config without running it"), True)
    common(sub.add_parser("run", help="run the experiment a config declares"), True)
    for name in PRESETS:
        common(sub.add_parser(name, help=f"run the {name} experiment (defaults unless --config)"), False)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be positive", file=sys.stderr)
            return EXIT_CONFIG
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be non-negative", file=sys.stderr)
        return EXIT_CONFIG
    preset = args.command if args.command in PRESETS else None
    try:
        loaded = load_config(args.config, preset)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        cfg = loaded.resolved
        print(f"ok: experiment {cfg['experiment']!r}, config hash {config_hash(loaded.raw)[:12]}")
        for note in loaded.notes:
            print(f"note: {note}")
        try:
            for w in sanity(cfg):
                print(w)
        except Exception as exc:  # diagnostics only
            print(f"warning: sanity check failed: {exc}")
        return EXIT_OK
    try:
        paths = execute(loaded, args.out, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

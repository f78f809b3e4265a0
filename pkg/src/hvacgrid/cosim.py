"""Minute-stepped controller/building/grid co-simulation.

Each simulated minute proceeds through fixed phases: build 30-minute
forecasts (perfect foresight from the day's profiles), let every building's
controller pick an HVAC mode, step the thermal plants, aggregate bus
injections, solve the power flow with the device states carried over from
the previous minute, update regulator and capacitor-bank controls from the
solved voltages and feeder current, and append everything to the results
store.  Runs are deterministic for a given scenario seed.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field, replace

import numpy as np
import yaml

from . import building as bld
from . import dpc as dpc_mod
from . import profiles
from .errors import ConfigError, DependencyError, DivergenceError
from .feeder import (CapBankState, FeederModel, RegulatorState, PvSystem,
                     aggregate_bus_injection, capbank_control, pf_tan,
                     pv_power, regulator_control, solve_powerflow)
from .rngs import substream

BASELINE_SETPOINT_RANGE = (23.0, 26.0)
BASELINE_DEADBAND = 1.0
# The predictive controller regulates to a band around the drawn setpoint;
# it reaches the policy as (y_min, y_max).  Occupant comfort is scored on a
# wider cooling-season band: the ceiling sits above the setpoint, and the
# floor is absolute, because a cooling-only plant free-floats toward the
# outdoor low overnight no matter who controls it.
CONTROL_BAND_BELOW = 0.75
CONTROL_BAND_ABOVE = 0.25
COMFORT_FLOOR_C = 17.5
COMFORT_CEIL_ABOVE = 2.0
# Compressor short-cycle protection: once the HVAC switches, the new mode
# holds for this many minutes regardless of the controller's command.
MIN_CYCLE_MIN = 5


@dataclass
class Scenario:
    control_mode: str = "baseline"  # baseline | dpc | off
    sync_mode: str = "nosync"  # nosync | sync
    weather_csv: str = ""
    irradiance_csv: str = ""
    static_profile_csv: str = ""
    duration_min: int = 1440
    seed: int = 0
    horizon: int = dpc_mod.HORIZON
    forecast_tout_sigma: float = 0.0  # optional forecast-noise hooks
    forecast_pv_flip_rate: float = 0.0

    def __post_init__(self):
        if self.control_mode not in ("baseline", "dpc", "off"):
            raise ConfigError(f"unknown control mode {self.control_mode!r}")
        if self.sync_mode not in ("nosync", "sync"):
            raise ConfigError(f"unknown sync mode {self.sync_mode!r}")
        if self.duration_min < 1:
            raise ConfigError("duration must be at least one minute")


def apply_sync_mode(pvs, sync_mode: str):
    """Stagger multi-model PV installations by {0, 3, 6} minutes, or not.

    In no-sync mode the three models of a grouped installation are offset
    three minutes apart on top of the group's configured base offset; in
    sync mode they all share the base offset exactly.  Single-model systems
    keep their configured offsets in both modes.
    """
    groups = {}
    for pv in pvs:
        if pv.group:
            groups.setdefault(pv.group, []).append(pv.name)
    base = {}
    for pv in pvs:
        if pv.group:
            base[pv.group] = min(base.get(pv.group, pv.offset_min), pv.offset_min)
    out = []
    for pv in pvs:
        if pv.group:
            rank = sorted(groups[pv.group]).index(pv.name)
            stagger = 0.0 if sync_mode == "sync" else 3.0 * rank
            out.append(replace(pv, offset_min=base[pv.group] + stagger))
        else:
            out.append(pv)
    return out


@dataclass
class ResultsStore:
    """Per-minute series for every bus, building instance, and device."""

    t_min: np.ndarray
    bus_ids: list
    v_pu: np.ndarray  # (T, B)
    bus_p_kw: np.ndarray  # (T, B) net injection consumed at the bus
    bus_q_kvar: np.ndarray
    building_ids: list
    tin_c: np.ndarray  # (T, N)
    mode: np.ndarray  # (T, N)
    bld_p_kw: np.ndarray  # (T, N) unscaled per-instance electric draw
    reg_names: list
    taps: np.ndarray  # (T, R)
    cap_names: list
    caps_on: np.ndarray  # (T, C)
    pv_names: list
    pv_kw: np.ndarray  # (T, P)
    meta: dict = field(default_factory=dict)


@dataclass
class _Instance:
    instance_id: str
    load_name: str
    bus: str
    model_id: str
    params: bld.RcParams
    pv_name: str  # tracked PV signal, "" when none


def _build_instances(feeder: FeederModel, buildings: dict):
    """Expand building-backed loads into controller-owning instances."""
    pv_by_load = {}
    for pv in feeder.pvs:
        if pv.load:
            pv_by_load.setdefault(pv.load, []).append(pv.name)
    for names in pv_by_load.values():
        names.sort()
    instances = []
    for load in feeder.loads:
        if load.kind != "building":
            continue
        tracked = pv_by_load.get(load.name, [])
        for i, model_id in enumerate(load.building_models):
            if model_id not in buildings:
                raise DependencyError(f"load {load.name} references unknown building model {model_id}")
            pv_name = tracked[i % len(tracked)] if tracked else ""
            instances.append(_Instance(
                instance_id=f"{load.name}_{i:02d}", load_name=load.name,
                bus=load.bus, model_id=model_id, params=buildings[model_id],
                pv_name=pv_name,
            ))
    return instances


def run_scenario(feeder: FeederModel, buildings: dict, bundles: dict,
                 scenario: Scenario) -> ResultsStore:
    """Simulate one scenario day; see the module docstring for phase order.

    ``buildings`` maps model id to RcParams; ``bundles`` maps model id to a
    trained DpcBundle and may be empty unless control_mode is ``dpc``.
    """
    horizon = scenario.horizon
    n_t = scenario.duration_min
    pvs = apply_sync_mode(feeder.pvs, scenario.sync_mode)
    instances = _build_instances(feeder, buildings)
    if scenario.control_mode == "dpc":
        missing = sorted({i.model_id for i in instances} - set(bundles))
        if missing:
            raise DependencyError(f"missing trained bundles for models: {missing}")

    # Profiles, padded by the horizon and held at their last value.
    tout = profiles.load_minutes(scenario.weather_csv, "tout_c", n_t + horizon)
    irr_ts, irr_frac = profiles.load_profile_csv(scenario.irradiance_csv, "irradiance_frac")
    static_frac = (
        profiles.load_minutes(scenario.static_profile_csv, "frac", n_t)
        if scenario.static_profile_csv else np.zeros(n_t)
    )
    minutes_ext = np.arange(n_t + horizon, dtype=np.float64)
    pv_gen = {
        pv.name: pv_power((irr_ts, irr_frac), pv.rating_kw, pv.offset_min, minutes_ext)
        for pv in pvs
    }
    pv_bin = {}
    thr = next(iter(bundles.values())).pv_threshold_fraction if bundles else dpc_mod.PV_THRESHOLD_FRACTION
    for pv in pvs:
        pv_bin[pv.name] = dpc_mod.pv_binary(pv_gen[pv.name], pv.rating_kw, thr)

    # Per-instance parameter arrays for vectorized stepping.
    n_i = len(instances)
    r = np.array([i.params.r for i in instances])
    c = np.array([i.params.c for i in instances])
    q = np.array([i.params.q_hvac_kw for i in instances])
    hvac_e = np.array([i.params.hvac_electric_kw for i in instances])
    gain_amp = np.array([i.params.gain_kw for i in instances])
    base_peak = np.array([i.params.base_kw for i in instances])
    decay = np.exp(-1.0 / (60.0 * r * c))

    setpoints = np.array([
        substream(scenario.seed, "thermostat", i).uniform(*BASELINE_SETPOINT_RANGE)
        for i in range(n_i)
    ])
    ymin = setpoints - CONTROL_BAND_BELOW
    ymax = setpoints + CONTROL_BAND_ABOVE
    comfort_lo = np.full(n_i, COMFORT_FLOOR_C)
    comfort_hi = setpoints + COMFORT_CEIL_ABOVE
    tin = setpoints.copy()
    modes = np.zeros(n_i, dtype=np.int8)

    # Group instances by bundle for batched policy evaluation.
    by_model = {}
    for idx, inst in enumerate(instances):
        by_model.setdefault(inst.model_id, []).append(idx)
    groups = [(mid, np.array(idxs)) for mid, idxs in by_model.items()]

    noise_rng = (
        substream(scenario.seed, "forecast-noise")
        if (scenario.forecast_tout_sigma > 0 or scenario.forecast_pv_flip_rate > 0)
        else None
    )

    reg_states = [RegulatorState(cfg) for cfg in feeder.regulators]
    cap_states = [CapBankState(cfg) for cfg in feeder.capbanks]
    reg_down = [feeder.downstream_bus(cfg) for cfg in feeder.regulators]

    bus_n = feeder.n_buses
    res = ResultsStore(
        t_min=np.arange(n_t, dtype=np.float64),
        bus_ids=list(feeder.bus_ids),
        v_pu=np.empty((n_t, bus_n)), bus_p_kw=np.zeros((n_t, bus_n)),
        bus_q_kvar=np.zeros((n_t, bus_n)),
        building_ids=[i.instance_id for i in instances],
        tin_c=np.empty((n_t, n_i)), mode=np.empty((n_t, n_i), dtype=np.int8),
        bld_p_kw=np.empty((n_t, n_i)),
        reg_names=[cfg.name for cfg in feeder.regulators],
        taps=np.empty((n_t, len(reg_states)), dtype=np.int64),
        cap_names=[cfg.name for cfg in feeder.capbanks],
        caps_on=np.empty((n_t, len(cap_states)), dtype=np.int8),
        pv_names=[pv.name for pv in pvs],
        pv_kw=np.empty((n_t, len(pvs))),
        meta={
            "control_mode": scenario.control_mode,
            "sync_mode": scenario.sync_mode,
            "seed": scenario.seed,
            "pv_offsets": {pv.name: pv.offset_min for pv in pvs},
            "bounds": {
                inst.instance_id: (float(comfort_lo[i]), float(comfort_hi[i]))
                for i, inst in enumerate(instances)
            },
            "control_bounds": {
                inst.instance_id: (float(ymin[i]), float(ymax[i]))
                for i, inst in enumerate(instances)
            },
        },
    )

    inst_pv_idx = np.array([
        res.pv_names.index(i.pv_name) if i.pv_name else -1 for i in instances
    ]) if instances else np.zeros(0, dtype=np.int64)
    pv_bin_mat = np.stack([pv_bin[name] for name in res.pv_names]) if pvs else np.zeros((0, n_t + horizon))
    if pvs:
        res.pv_kw[:] = np.stack([pv_gen[name][:n_t] for name in res.pv_names]).T
    peak_by_load = {ld.name: 0.0 for ld in feeder.loads}

    # Static per-load lookups so the minute loop stays cheap.
    load_insts = {
        ld.name: np.array([k for k, inst in enumerate(instances) if inst.load_name == ld.name],
                          dtype=np.int64)
        for ld in feeder.loads if ld.kind == "building"
    }
    load_pvs = {ld.name: [pv.name for pv in pvs if pv.load == ld.name] for ld in feeder.loads}
    tied = {name for names in load_pvs.values() for name in names}
    loose_pvs = [pv for pv in pvs if pv.name not in tied]

    hold_until = np.zeros(n_i)
    for t in range(n_t):
        # (1)+(2) forecasts and control decisions
        want = modes
        if scenario.control_mode == "baseline":
            upper = tin > setpoints + BASELINE_DEADBAND / 2.0
            lower = tin < setpoints - BASELINE_DEADBAND / 2.0
            want = np.where(upper, 1, np.where(lower, 0, modes)).astype(np.int8)
        elif scenario.control_mode == "off":
            want = np.zeros(n_i, dtype=np.int8)
        else:
            tout_fc = np.tile(tout[t:t + horizon], (n_i, 1))
            if noise_rng is not None and scenario.forecast_tout_sigma > 0:
                tout_fc = tout_fc + noise_rng.normal(0.0, scenario.forecast_tout_sigma, tout_fc.shape)
            pv_fc = np.zeros((n_i, horizon))
            has_pv = inst_pv_idx >= 0
            pv_fc[has_pv] = pv_bin_mat[inst_pv_idx[has_pv], t:t + horizon]
            if noise_rng is not None and scenario.forecast_pv_flip_rate > 0:
                flips = noise_rng.random(pv_fc.shape) < scenario.forecast_pv_flip_rate
                pv_fc = np.where(flips, 1.0 - pv_fc, pv_fc)
            want = modes.copy()
            for mid, idxs in groups:
                want[idxs] = dpc_mod.policy_act_batch(
                    bundles[mid], tin[idxs], ymin[idxs], ymax[idxs],
                    pv_fc[idxs], tout_fc[idxs],
                )

        # Equipment-level short-cycle protection holds the last switch.
        switch = (want != modes) & (t >= hold_until)
        hold_until = np.where(switch, t + MIN_CYCLE_MIN, hold_until)
        modes = np.where(switch, want, modes).astype(np.int8)

        # (3) building step over this minute
        res.tin_c[t] = tin
        res.mode[t] = modes
        gain = gain_amp * bld.diurnal_gain(float(t % bld.MIN_PER_DAY), 1.0)
        t_eq = tout[t] + r * (gain - modes * q)
        tin = t_eq + (tin - t_eq) * decay
        bld_p = hvac_e * modes + bld.base_load_kw(float(t % bld.MIN_PER_DAY), base_peak)
        res.bld_p_kw[t] = bld_p

        # (4) aggregate injections per bus
        injections = {}
        for load in feeder.loads:
            if load.kind == "building":
                pv_here = sum(pv_gen[name][t] for name in load_pvs[load.name])
                p, qv = aggregate_bus_injection(load, bld_p[load_insts[load.name]], pv_here)
                raw = p + pv_here  # load before PV offset, for peak bookkeeping
            else:
                raw = load.peak_kw * static_frac[t]
                p, qv = raw, raw * pf_tan(load.power_factor)
            peak_by_load[load.name] = max(peak_by_load[load.name], raw)
            cur = injections.get(load.bus, (0.0, 0.0))
            injections[load.bus] = (cur[0] + p, cur[1] + qv)
        for pv in loose_pvs:  # PV not tied to a load nets at its bus
            cur = injections.get(pv.bus, (0.0, 0.0))
            injections[pv.bus] = (cur[0] - pv_gen[pv.name][t], cur[1])

        # (5) power flow with device states carried into this minute
        taps = {st.config.name: st.tap for st in reg_states}
        caps = {st.config.name: st.on for st in cap_states}
        try:
            flow = solve_powerflow(feeder, injections, taps=taps, caps_on=caps)
        except DivergenceError as exc:
            raise DivergenceError(f"t={t} min: {exc}") from exc

        res.v_pu[t] = flow.v_mag()
        for bus, (p, qv) in injections.items():
            j = feeder.index[bus]
            res.bus_p_kw[t, j] = p
            res.bus_q_kvar[t, j] = qv
        res.taps[t] = [st.tap for st in reg_states]
        res.caps_on[t] = [int(st.on) for st in cap_states]

        # (6) device controls react to solved quantities, effective next minute
        for k, st in enumerate(reg_states):
            v_here = float(np.abs(flow.v[feeder.index[reg_down[k]]]))
            reg_states[k], _ = regulator_control(st, v_here, 60.0)
        for k, st in enumerate(cap_states):
            cap_states[k] = capbank_control(st, flow.head_current_a, 60.0)

    res.meta["achieved_peak_kw"] = {k: float(v) for k, v in peak_by_load.items()}
    return res


# --- scenario/building files and results CSVs ---------------------------------


def load_buildings_csv(path) -> dict:
    """Building models: id,r,c,q_hvac_kw,cop,gain_kw,base_kw."""
    out = {}
    with open(path, "r", newline="") as f:
        for row in csv.DictReader(f):
            out[row["id"]] = bld.RcParams(
                r=float(row["r"]), c=float(row["c"]),
                q_hvac_kw=float(row["q_hvac_kw"]), cop=float(row["cop"]),
                gain_kw=float(row["gain_kw"]), base_kw=float(row["base_kw"]),
            )
    if not out:
        raise ConfigError(f"{path}: no building models")
    return out


def save_buildings_csv(models: dict, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["id", "r", "c", "q_hvac_kw", "cop", "gain_kw", "base_kw"])
        for mid in sorted(models):
            p = models[mid]
            w.writerow([mid] + ["%.17g" % v for v in
                                (p.r, p.c, p.q_hvac_kw, p.cop, p.gain_kw, p.base_kw)])


_RESULT_FILES = {
    "voltages": ("t_min", "bus", "v_pu"),
    "bus_power": ("t_min", "bus", "p_kw", "q_kvar"),
    "buildings": ("t_min", "building", "tin_c", "mode", "p_kw"),
    "regulators": ("t_min", "reg", "tap"),
    "capbanks": ("t_min", "cap", "on"),
    "pv": ("t_min", "pv", "p_kw"),
}


def export_results(res: ResultsStore, out_dir) -> None:
    """Write one CSV per category with fixed headers."""
    os.makedirs(out_dir, exist_ok=True)

    def write(name, header, rows):
        with open(os.path.join(out_dir, name + ".csv"), "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(header)
            w.writerows(rows)

    g = "%.17g"
    write("voltages", _RESULT_FILES["voltages"], (
        (int(t), b, g % res.v_pu[ti, bi])
        for ti, t in enumerate(res.t_min) for bi, b in enumerate(res.bus_ids)
    ))
    write("bus_power", _RESULT_FILES["bus_power"], (
        (int(t), b, g % res.bus_p_kw[ti, bi], g % res.bus_q_kvar[ti, bi])
        for ti, t in enumerate(res.t_min) for bi, b in enumerate(res.bus_ids)
    ))
    write("buildings", _RESULT_FILES["buildings"], (
        (int(t), b, g % res.tin_c[ti, bi], int(res.mode[ti, bi]), g % res.bld_p_kw[ti, bi])
        for ti, t in enumerate(res.t_min) for bi, b in enumerate(res.building_ids)
    ))
    write("regulators", _RESULT_FILES["regulators"], (
        (int(t), rname, int(res.taps[ti, ri]))
        for ti, t in enumerate(res.t_min) for ri, rname in enumerate(res.reg_names)
    ))
    write("capbanks", _RESULT_FILES["capbanks"], (
        (int(t), cname, int(res.caps_on[ti, ci]))
        for ti, t in enumerate(res.t_min) for ci, cname in enumerate(res.cap_names)
    ))
    write("pv", _RESULT_FILES["pv"], (
        (int(t), pname, g % res.pv_kw[ti, pi])
        for ti, t in enumerate(res.t_min) for pi, pname in enumerate(res.pv_names)
    ))
    bounds = res.meta.get("bounds", {})
    write("comfort_bounds", ("building", "y_min_c", "y_max_c"), (
        (b, g % lo, g % hi) for b, (lo, hi) in bounds.items()
    ))


def _read_wide(path, entity_col, value_cols):
    """Rebuild (t, entities, matrix-per-value-column) from a results CSV."""
    with open(path, "r", newline="") as f:
        rows = list(csv.DictReader(f))
    t_vals, ents = [], []
    seen_t, seen_e = set(), set()
    for row in rows:
        if row["t_min"] not in seen_t:
            seen_t.add(row["t_min"])
            t_vals.append(float(row["t_min"]))
        if row[entity_col] not in seen_e:
            seen_e.add(row[entity_col])
            ents.append(row[entity_col])
    e_idx = {e: i for i, e in enumerate(ents)}
    t_idx = {v: i for i, v in enumerate(t_vals)}
    mats = [np.zeros((len(t_vals), len(ents))) for _ in value_cols]
    for row in rows:
        ti = t_idx[float(row["t_min"])]
        ei = e_idx[row[entity_col]]
        for m, colname in zip(mats, value_cols):
            m[ti, ei] = float(row[colname])
    return np.asarray(t_vals), ents, mats


def load_results(out_dir) -> ResultsStore:
    """Reload a results directory written by export_results."""
    p = lambda n: os.path.join(out_dir, n + ".csv")
    t, bus_ids, (v,) = _read_wide(p("voltages"), "bus", ["v_pu"])
    _, _, (bp, bq) = _read_wide(p("bus_power"), "bus", ["p_kw", "q_kvar"])
    _, bids, (tin, mode, bldp) = _read_wide(p("buildings"), "building",
                                            ["tin_c", "mode", "p_kw"])
    _, regs, (taps,) = _read_wide(p("regulators"), "reg", ["tap"])
    _, caps, (con,) = _read_wide(p("capbanks"), "cap", ["on"])
    _, pvn, (pvk,) = _read_wide(p("pv"), "pv", ["p_kw"])
    meta = {}
    bpath = p("comfort_bounds")
    if os.path.exists(bpath):
        with open(bpath, "r", newline="") as f:
            meta["bounds"] = {
                row["building"]: (float(row["y_min_c"]), float(row["y_max_c"]))
                for row in csv.DictReader(f)
            }
    return ResultsStore(
        t_min=t, bus_ids=bus_ids, v_pu=v, bus_p_kw=bp, bus_q_kvar=bq,
        building_ids=bids, tin_c=tin, mode=mode.astype(np.int8), bld_p_kw=bldp,
        reg_names=regs, taps=taps.astype(np.int64),
        cap_names=caps, caps_on=con.astype(np.int8),
        pv_names=pvn, pv_kw=pvk, meta=meta,
    )


@dataclass
class ScenarioFile:
    """A scenario YAML resolved to absolute paths."""

    scenario: Scenario
    feeder_path: str
    buildings_path: str
    bundle_dir: str


def load_scenario(path) -> ScenarioFile:
    """Read a scenario file; relative paths resolve against its directory."""
    with open(path, "r") as f:
        raw = yaml.safe_load(f)
    base = os.path.dirname(os.path.abspath(path))

    def rel(p):
        return p if not p or os.path.isabs(p) else os.path.join(base, p)

    try:
        scenario = Scenario(
            control_mode=str(raw.get("control_mode", "baseline")),
            sync_mode=str(raw.get("sync_mode", "nosync")),
            weather_csv=rel(str(raw["weather"])),
            irradiance_csv=rel(str(raw["irradiance"])),
            static_profile_csv=rel(str(raw.get("static_profile", ""))),
            duration_min=int(raw.get("duration_min", 1440)),
            seed=int(raw["seed"]),
            forecast_tout_sigma=float(raw.get("forecast_tout_sigma", 0.0)),
            forecast_pv_flip_rate=float(raw.get("forecast_pv_flip_rate", 0.0)),
        )
        return ScenarioFile(
            scenario=scenario,
            feeder_path=rel(str(raw["feeder"])),
            buildings_path=rel(str(raw["buildings"])),
            bundle_dir=rel(str(raw.get("bundle_dir", ""))),
        )
    except KeyError as exc:
        raise ConfigError(f"{path}: missing scenario field {exc}") from exc

"""Balanced positive-sequence radial feeder with slow voltage-control devices.

The network is a tree of buses rooted at the slack source.  Power flow uses
the backward/forward sweep: accumulate branch currents from the leaves, then
update voltages from the root, iterating until the largest voltage change
falls below tolerance.  Loads are constant-power; a tap-changing regulator on
a line acts as an ideal ratio (1 + tap * step) at the downstream end of the
line's series impedance; a switched capacitor bank injects reactive power at
its bus.  Regulator and capacitor controls run on solved quantities with a
response delay, mirroring field devices that react in tens of seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import yaml

from .errors import ConfigError, DivergenceError, InputShapeError

REG_STEP_PU = 0.00625
REG_MAX_TAP = 16
DEFAULT_PF = 0.9

PF_TAN = {0.9: math.tan(math.acos(0.9))}


def pf_tan(power_factor: float) -> float:
    if not (0.0 < power_factor <= 1.0):
        raise ConfigError("power factor must lie in (0, 1]")
    return math.tan(math.acos(power_factor))


@dataclass(frozen=True)
class RegulatorConfig:
    name: str
    line: str  # "from-to"
    step_pu: float = REG_STEP_PU
    max_tap: int = REG_MAX_TAP
    setpoint_pu: float = 1.0
    bandwidth_pu: float = 0.0167  # 2 V on a 120 V base
    delay_s: float = 30.0


@dataclass
class RegulatorState:
    config: RegulatorConfig
    tap: int = 0
    timer_s: float = 0.0

    def ratio(self) -> float:
        return 1.0 + self.tap * self.config.step_pu


@dataclass(frozen=True)
class CapBankConfig:
    name: str
    bus: str
    kvar: float
    i_on_a: float  # switch on above this current
    i_off_a: float  # switch off below this current
    delay_s: float = 120.0

    def __post_init__(self):
        if self.i_on_a <= self.i_off_a:
            raise ConfigError(
                f"capbank {self.name}: on-threshold must exceed off-threshold"
            )
        if self.kvar <= 0:
            raise ConfigError(f"capbank {self.name}: rating must be positive")


@dataclass
class CapBankState:
    config: CapBankConfig
    on: bool = False
    timer_s: float = 0.0


@dataclass(frozen=True)
class PvSystem:
    name: str
    bus: str
    rating_kw: float
    profile: str = "irradiance"
    offset_min: float = 0.0
    group: str = ""  # non-empty for multi-model installations on one bus
    load: str = ""  # building load whose controllers track this system

    def __post_init__(self):
        if self.rating_kw <= 0:
            raise ConfigError(f"pv {self.name}: rating must be positive")


@dataclass(frozen=True)
class LoadAssignment:
    name: str
    bus: str
    kind: str  # "building" or "static"
    building_models: tuple = ()  # model id per instance
    scaling_factor: float = 1.0
    peak_kw: float = 0.0
    profile: str = "static"
    power_factor: float = DEFAULT_PF

    def __post_init__(self):
        if self.kind not in ("building", "static"):
            raise ConfigError(f"load {self.name}: unknown kind {self.kind!r}")
        if self.kind == "building" and (self.scaling_factor <= 0 or not self.building_models):
            raise ConfigError(f"load {self.name}: building load needs models and a positive factor")
        if self.kind == "static" and self.peak_kw < 0:
            raise ConfigError(f"load {self.name}: negative static peak")
        pf_tan(self.power_factor)


@dataclass
class FeederModel:
    """Radial network plus device/load/PV placement.

    Buses and lines are validated into a tree on construction; per-child
    arrays (parent index, series impedance, regulator index) drive the
    sweep solver.
    """

    bus_ids: list
    base_kv: dict
    lines: list  # (from_id, to_id, r_ohm, x_ohm, regulator_name or "")
    source_bus: str
    source_v_pu: float
    power_base_mva: float
    regulators: list  # RegulatorConfig
    capbanks: list  # CapBankConfig
    loads: list  # LoadAssignment
    pvs: list  # PvSystem

    def __post_init__(self):
        n = len(self.bus_ids)
        if len(set(self.bus_ids)) != n:
            raise ConfigError("duplicate bus ids")
        if self.source_bus not in self.bus_ids:
            raise ConfigError(f"source bus {self.source_bus} not defined")
        if len(self.lines) != n - 1:
            raise ConfigError(
                f"{len(self.lines)} lines cannot form a tree over {n} buses"
            )
        self.index = {b: i for i, b in enumerate(self.bus_ids)}
        reg_by_line = {}
        for reg in self.regulators:
            a, _, b = reg.line.partition("-")
            if a not in self.index or b not in self.index:
                raise ConfigError(f"regulator {reg.name} references unknown line {reg.line}")
            reg_by_line[frozenset((a, b))] = reg.name

        adj = {i: [] for i in range(n)}
        line_info = {}
        for fr, to, r_ohm, x_ohm, reg_name in self.lines:
            if fr not in self.index or to not in self.index:
                raise ConfigError(f"line {fr}-{to} references unknown bus")
            i, j = self.index[fr], self.index[to]
            adj[i].append(j)
            adj[j].append(i)
            key = frozenset((fr, to))
            want = reg_by_line.pop(key, "")
            if want and reg_name and want != reg_name:
                raise ConfigError(f"conflicting regulator names on line {fr}-{to}")
            line_info[key] = (r_ohm, x_ohm, reg_name or want)
        if reg_by_line:
            missing = ", ".join(sorted(reg_by_line.values()))
            raise ConfigError(f"regulator line(s) not present in the tree: {missing}")

        # Orient the tree away from the source and build sweep arrays.
        root = self.index[self.source_bus]
        parent = np.full(n, -1, dtype=np.int64)
        order = [root]
        seen = {root}
        for node in order:
            for nb in adj[node]:
                if nb not in seen:
                    seen.add(nb)
                    parent[nb] = node
                    order.append(nb)
        if len(order) != n:
            unreached = [b for b in self.bus_ids if self.index[b] not in seen]
            raise ConfigError(f"feeder is not connected: unreachable {unreached}")
        self.topo = np.array(order, dtype=np.int64)
        self.parent = parent

        reg_names = [r.name for r in self.regulators]
        self.z_pu = np.zeros(n, dtype=np.complex128)
        self.reg_of_child = np.full(n, -1, dtype=np.int64)
        for key, (r_ohm, x_ohm, reg_name) in line_info.items():
            a, b = (self.index[x] for x in key)
            child = b if parent[b] == a else a
            par = parent[child]
            if par < 0 or self.index[self.bus_ids[par]] not in (a, b):
                raise ConfigError(f"line {set(key)} does not follow the tree")
            kv = self.base_kv[self.bus_ids[par]]
            z_base = kv * kv / self.power_base_mva
            self.z_pu[child] = complex(r_ohm, x_ohm) / z_base
            if reg_name:
                self.reg_of_child[child] = reg_names.index(reg_name)

        for cap in self.capbanks:
            if cap.bus not in self.index:
                raise ConfigError(f"capbank {cap.name} on unknown bus {cap.bus}")
        for load in self.loads:
            if load.bus not in self.index:
                raise ConfigError(f"load {load.name} on unknown bus {load.bus}")
        for pv in self.pvs:
            if pv.bus not in self.index:
                raise ConfigError(f"pv {pv.name} on unknown bus {pv.bus}")

    @property
    def n_buses(self) -> int:
        return len(self.bus_ids)

    @property
    def s_base_kw(self) -> float:
        return self.power_base_mva * 1000.0

    @property
    def i_base_a(self) -> float:
        kv = self.base_kv[self.source_bus]
        return self.power_base_mva * 1e6 / (math.sqrt(3.0) * kv * 1e3)

    def downstream_bus(self, reg: RegulatorConfig) -> str:
        a, _, b = reg.line.partition("-")
        ia, ib = self.index[a], self.index[b]
        child = ib if self.parent[ib] == ia else ia
        return self.bus_ids[child]


@dataclass
class PowerFlowResult:
    v: np.ndarray  # complex bus voltage, p.u., aligned with bus_ids
    i_down: np.ndarray  # complex current on each bus's feeding line (downstream side)
    head_current_a: float
    sweeps: int
    loss_pu: complex

    def v_mag(self) -> np.ndarray:
        return np.abs(self.v)


def solve_powerflow(model: FeederModel, injections: dict, taps: dict = None,
                    caps_on: dict = None, tol: float = 1e-6,
                    max_sweeps: int = 100) -> PowerFlowResult:
    """Backward/forward sweep with constant-power injections.

    ``injections`` maps bus id to (P_kW, Q_kvar) consumed; generation enters
    as negative P.  ``taps`` maps regulator name to its tap, ``caps_on`` maps
    capacitor-bank name to its switch state.
    """
    n = model.n_buses
    s_pu = np.zeros(n, dtype=np.complex128)
    for bus, (p_kw, q_kvar) in injections.items():
        if bus not in model.index:
            raise InputShapeError(f"injection at unknown bus {bus}")
        if not (np.isfinite(p_kw) and np.isfinite(q_kvar)):
            raise DivergenceError(f"non-finite injection at bus {bus}")
        s_pu[model.index[bus]] += complex(p_kw, q_kvar) / model.s_base_kw
    for cap in model.capbanks:
        if caps_on and caps_on.get(cap.name, False):
            s_pu[model.index[cap.bus]] += complex(0.0, -cap.kvar) / model.s_base_kw

    ratio = np.ones(n)
    for child in range(n):
        r = model.reg_of_child[child]
        if r >= 0:
            reg = model.regulators[r]
            tap = 0 if taps is None else int(taps.get(reg.name, 0))
            ratio[child] = 1.0 + tap * reg.step_pu

    root = model.index[model.source_bus]
    v = np.full(n, complex(model.source_v_pu, 0.0), dtype=np.complex128)
    i_down = np.zeros(n, dtype=np.complex128)
    rev = model.topo[::-1]
    fwd = model.topo[1:]
    for sweep in range(1, max_sweeps + 1):
        i_node = np.conj(s_pu / v)
        i_down[:] = 0.0
        for b in rev:
            i_down[b] += i_node[b]
            p = model.parent[b]
            if p >= 0:
                i_down[p] += ratio[b] * i_down[b]
        v_new = v.copy()
        v_new[root] = complex(model.source_v_pu, 0.0)
        for b in fwd:
            p = model.parent[b]
            v_new[b] = ratio[b] * (v_new[p] - model.z_pu[b] * ratio[b] * i_down[b])
        delta = np.abs(v_new - v)
        v = v_new
        if not np.isfinite(v).all():
            worst = model.bus_ids[int(np.argmin(np.isfinite(v)))]
            raise DivergenceError(
                f"power flow overflow near bus {worst}: load exceeds feeder capability"
            )
        if delta.max() < tol:
            head = sum(
                ratio[b] * i_down[b]
                for b in range(n)
                if model.parent[b] == root
            )
            loss = np.complex128(0.0)
            for b in range(n):
                if model.parent[b] >= 0:
                    i_up = ratio[b] * i_down[b]
                    loss += model.z_pu[b] * abs(i_up) ** 2
            return PowerFlowResult(
                v=v, i_down=i_down,
                head_current_a=float(abs(head) * model.i_base_a),
                sweeps=sweep, loss_pu=loss,
            )
    worst = model.bus_ids[int(np.argmax(delta))]
    raise DivergenceError(
        f"power flow did not converge in {max_sweeps} sweeps (worst bus {worst}, "
        f"|dV|={delta.max():.3e})"
    )


def regulator_control(state: RegulatorState, measured_v_pu: float, dt_s: float):
    """Delayed one-step tap correction; returns (new_state, tap_changed)."""
    if dt_s <= 0:
        raise ConfigError("dt must be positive")
    cfg = state.config
    err = measured_v_pu - cfg.setpoint_pu
    if abs(err) <= cfg.bandwidth_pu / 2.0:
        return RegulatorState(cfg, state.tap, 0.0), False
    timer = state.timer_s + dt_s
    if timer < cfg.delay_s:
        return RegulatorState(cfg, state.tap, timer), False
    step = 1 if err < 0 else -1  # low voltage -> raise the ratio
    new_tap = int(np.clip(state.tap + step, -cfg.max_tap, cfg.max_tap))
    return RegulatorState(cfg, new_tap, 0.0), new_tap != state.tap


def capbank_control(state: CapBankState, feeder_current_a: float, dt_s: float):
    """Current-threshold switching with hysteresis and a response delay."""
    if dt_s <= 0:
        raise ConfigError("dt must be positive")
    cfg = state.config
    if not state.on and feeder_current_a > cfg.i_on_a:
        timer = state.timer_s + dt_s
        if timer >= cfg.delay_s:
            return CapBankState(cfg, True, 0.0)
        return CapBankState(cfg, False, timer)
    if state.on and feeder_current_a < cfg.i_off_a:
        timer = state.timer_s + dt_s
        if timer >= cfg.delay_s:
            return CapBankState(cfg, False, 0.0)
        return CapBankState(cfg, True, timer)
    return CapBankState(cfg, state.on, 0.0)


def pv_power(profile, rating_kw: float, offset_min: float, t_min):
    """PV output: rating * irradiance(t - offset), clamped to the profile span.

    ``profile`` is an (timestamps_min, fraction) pair; fractions must lie in
    [0, 1.2].  Times before the first sample clamp to it.
    """
    ts, frac = profile
    frac = np.asarray(frac, dtype=np.float64)
    if frac.min() < 0.0 or frac.max() > 1.2:
        raise ConfigError("irradiance fractions must lie in [0, 1.2]")
    val = np.interp(np.asarray(t_min, dtype=np.float64) - offset_min, ts, frac)
    out = np.maximum(rating_kw * val, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def aggregate_bus_injection(assignment: LoadAssignment, building_powers_kw,
                            pv_kw: float):
    """Net (P_kW, Q_kvar) of a building-backed load minus its PV output.

    Buildings are scaled by the assignment factor and draw at the configured
    lagging power factor; PV injects real power only.
    """
    total = float(np.sum(np.asarray(building_powers_kw, dtype=np.float64)))
    if total < 0:
        raise ConfigError("building powers must be non-negative")
    p_load = assignment.scaling_factor * total
    q_load = p_load * pf_tan(assignment.power_factor)
    return p_load - pv_kw, q_load


# --- configuration file -------------------------------------------------------


def load_feeder_config(path) -> FeederModel:
    """Read the YAML feeder description (see assets/feeder34.yaml)."""
    with open(path, "r") as f:
        raw = yaml.safe_load(f)
    try:
        buses = raw["buses"]
        bus_ids = [str(b["id"]) for b in buses]
        base_kv = {str(b["id"]): float(b["base_kv"]) for b in buses}
        lines = [
            (str(ln["from"]), str(ln["to"]), float(ln["r_ohm"]), float(ln["x_ohm"]),
             str(ln.get("regulator", "")))
            for ln in raw["lines"]
        ]
        regulators = [
            RegulatorConfig(
                name=str(r["name"]), line=str(r["line"]),
                step_pu=float(r.get("step_pu", REG_STEP_PU)),
                max_tap=int(r.get("max_tap", REG_MAX_TAP)),
                setpoint_pu=float(r.get("setpoint_pu", 1.0)),
                bandwidth_pu=float(r.get("bandwidth_pu", 0.0167)),
                delay_s=float(r.get("delay_s", 30.0)),
            )
            for r in raw.get("regulators", [])
        ]
        capbanks = [
            CapBankConfig(
                name=str(c["name"]), bus=str(c["bus"]), kvar=float(c["kvar"]),
                i_on_a=float(c["i_on_a"]), i_off_a=float(c["i_off_a"]),
                delay_s=float(c.get("delay_s", 120.0)),
            )
            for c in raw.get("capbanks", [])
        ]
        loads = []
        for ld in raw.get("loads", []):
            kind = str(ld.get("kind", "building"))
            loads.append(LoadAssignment(
                name=str(ld["name"]), bus=str(ld["bus"]), kind=kind,
                building_models=tuple(str(m) for m in ld.get("buildings", [])),
                scaling_factor=float(ld.get("scaling_factor", 1.0)),
                peak_kw=float(ld.get("peak_kw", 0.0)),
                profile=str(ld.get("profile", "static")),
                power_factor=float(ld.get("power_factor", DEFAULT_PF)),
            ))
        pvs = [
            PvSystem(
                name=str(p["name"]), bus=str(p["bus"]),
                rating_kw=float(p["rating_kw"]),
                profile=str(p.get("profile", "irradiance")),
                offset_min=float(p.get("offset_min", 0.0)),
                group=str(p.get("group", "")),
                load=str(p.get("load", "")),
            )
            for p in raw.get("pvs", [])
        ]
        model = FeederModel(
            bus_ids=bus_ids, base_kv=base_kv, lines=lines,
            source_bus=str(raw["source"]["bus"]),
            source_v_pu=float(raw["source"].get("v_pu", 1.0)),
            power_base_mva=float(raw.get("power_base_mva", 2.5)),
            regulators=regulators, capbanks=capbanks, loads=loads, pvs=pvs,
        )
    except KeyError as exc:
        raise ConfigError(f"{path}: missing feeder config field {exc}") from exc
    return model

"""First-order RC residential thermal plant and training-data generation.

Each building is a single thermal zone:

    dT/dt = (T_out - T_in) / (R C) + g / C - mode Q_hvac / C

with R in C/kW, C in kWh/C, the HVAC thermal rating Q_hvac in kW (cooling),
and the internal-plus-solar gain g in kW.  The right-hand side is linear in
T_in, so a step of any length integrates exactly:

    T_eq = T_out + R (g - mode Q_hvac)
    T(t + dt) = T_eq + (T(t) - T_eq) exp(-dt / (R C))

A deadband thermostat provides the baseline control, and randomized
setpoint/deadband/availability schedules drive the plant to produce the
1-minute training sequences used for thermal-model identification.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputShapeError, NumericError
from .rngs import substream

MIN_PER_DAY = 1440
DATASET_DAYS = 40
WINDOW_MIN = 30

# Training-schedule ranges: cooling setpoints span 22-28 C with 1-3 C
# deadbands, segments hold for 2-4 hours, and HVAC is unavailable on about
# 20 % of days so the data covers free-floating dynamics.
SETPOINT_RANGE = (22.0, 28.0)
DEADBAND_RANGE = (1.0, 3.0)
SEGMENT_RANGE_MIN = (120.0, 240.0)
UNAVAILABLE_FRACTION = 0.2


@dataclass(frozen=True)
class RcParams:
    """Thermal and electrical parameters of one building model.

    base_kw is the non-HVAC appliance load at its daily peak; the electric
    HVAC draw is q_hvac_kw / cop.
    """

    r: float  # C per kW
    c: float  # kWh per C
    q_hvac_kw: float  # thermal cooling rating, positive
    cop: float
    gain_kw: float  # diurnal internal+solar gain amplitude
    base_kw: float = 0.5

    def __post_init__(self):
        if not (self.r > 0 and self.c > 0 and self.q_hvac_kw > 0 and self.cop >= 1):
            raise ConfigError(f"invalid RC parameters: {self}")

    @property
    def hvac_electric_kw(self) -> float:
        return self.q_hvac_kw / self.cop


@dataclass
class BuildingState:
    tin_c: float
    hvac_mode: int = 0
    clock_min: float = 0.0


def step_building(params: RcParams, state: BuildingState, tout_c: float,
                  gain_kw: float, dt_min: float) -> BuildingState:
    """Advance one building by ``dt_min`` minutes using the exact solution."""
    if dt_min <= 0:
        raise ConfigError("dt must be positive")
    vals = (state.tin_c, tout_c, gain_kw)
    if not all(np.isfinite(v) for v in vals):
        raise NumericError(f"non-finite thermal input: tin={vals[0]}, tout={vals[1]}, gain={vals[2]}")
    t_eq = tout_c + params.r * (gain_kw - state.hvac_mode * params.q_hvac_kw)
    decay = np.exp(-dt_min / (60.0 * params.r * params.c))
    tin2 = t_eq + (state.tin_c - t_eq) * decay
    return BuildingState(tin_c=float(tin2), hvac_mode=state.hvac_mode,
                         clock_min=state.clock_min + dt_min)


def thermostat_deadband(tin_c: float, setpoint_c: float, deadband_c: float,
                        prev_mode: int) -> int:
    """Cooling hysteresis: on above the band, off below it, hold inside."""
    if deadband_c <= 0:
        raise ConfigError("deadband must be positive")
    if tin_c > setpoint_c + deadband_c / 2.0:
        return 1
    if tin_c < setpoint_c - deadband_c / 2.0:
        return 0
    return int(prev_mode)


def diurnal_gain(minute_of_day: float, amplitude_kw: float):
    """Half-sine internal+solar gain between 07:00 and 21:00, zero overnight."""
    m = np.asarray(minute_of_day, dtype=np.float64) % MIN_PER_DAY
    up, down = 7 * 60.0, 21 * 60.0
    out = np.where(
        (m >= up) & (m <= down),
        amplitude_kw * np.sin(np.pi * (m - up) / (down - up)),
        0.0,
    )
    if out.ndim == 0:
        return float(out)
    return out


def base_load_kw(minute_of_day: float, peak_kw: float):
    """Non-HVAC appliance draw: 40 % floor with morning/evening humps."""
    m = np.asarray(minute_of_day, dtype=np.float64) % MIN_PER_DAY
    h = m / 60.0
    morning = np.exp(-0.5 * ((h - 7.5) / 1.5) ** 2)
    evening = np.exp(-0.5 * ((h - 19.5) / 2.5) ** 2)
    frac = 0.4 + 0.6 * np.maximum(morning, evening)
    out = peak_kw * frac
    if out.ndim == 0:
        return float(out)
    return out


@dataclass
class ThermostatSchedule:
    """Piecewise-constant (setpoint, deadband) segments plus day availability."""

    setpoints_c: np.ndarray  # per segment
    deadbands_c: np.ndarray
    durations_min: np.ndarray
    available_days: np.ndarray  # bool per day

    def __post_init__(self):
        n = len(self.setpoints_c)
        if not (len(self.deadbands_c) == n and len(self.durations_min) == n):
            raise InputShapeError("schedule segment arrays must align")

    def per_minute(self, n_minutes: int):
        """Expand to per-minute (setpoint, deadband, available) arrays."""
        edges = np.concatenate([[0.0], np.cumsum(self.durations_min)])
        if edges[-1] < n_minutes:
            raise ConfigError("schedule shorter than requested span")
        minutes = np.arange(n_minutes, dtype=np.float64)
        seg = np.searchsorted(edges, minutes, side="right") - 1
        day = (minutes // MIN_PER_DAY).astype(int)
        avail = self.available_days[np.minimum(day, len(self.available_days) - 1)]
        return self.setpoints_c[seg], self.deadbands_c[seg], avail


def generate_training_schedule(seed, days: int) -> ThermostatSchedule:
    """Randomized schedule spanning ``days`` whole days.

    Setpoints, deadbands, and segment lengths are drawn uniformly from the
    training ranges; each day is independently unavailable with probability
    0.2.  Deterministic for a given seed.
    """
    if days < 1:
        raise ConfigError("need at least one day")
    rng = seed if isinstance(seed, np.random.Generator) else substream(seed, "schedule")
    total = days * MIN_PER_DAY
    sps, dbs, durs = [], [], []
    covered = 0.0
    while covered < total:
        sps.append(rng.uniform(*SETPOINT_RANGE))
        dbs.append(rng.uniform(*DEADBAND_RANGE))
        d = rng.uniform(*SEGMENT_RANGE_MIN)
        durs.append(d)
        covered += d
    available = rng.random(days) >= UNAVAILABLE_FRACTION
    return ThermostatSchedule(
        setpoints_c=np.asarray(sps),
        deadbands_c=np.asarray(dbs),
        durations_min=np.asarray(durs),
        available_days=available,
    )


def random_buildings(n: int, seed: int) -> list:
    """Randomized building models standing in for a survey of real homes.

    R in 3-8 C/kW, C in 1.5-4 kWh/C, COP in 2.5-4.  The HVAC thermal rating
    is sized with margin against a 33 C design day so the baseline thermostat
    can always hold its band.
    """
    out = []
    for i in range(n):
        rng = substream(seed, "building", i)
        r = rng.uniform(3.0, 8.0)
        c = rng.uniform(1.5, 4.0)
        cop = rng.uniform(3.2, 4.5)
        gain = rng.uniform(0.3, 0.8)
        # Units are oversized against the 33 C design day, as installed
        # equipment tends to be, with the pull-down rate Q/C kept between
        # 2.2 and 5.5 C/h across the housing stock.
        q = float(np.clip(2.6 * ((33.0 - 22.0) / r + gain), 2.2 * c, 5.5 * c))
        base = rng.uniform(0.3, 0.7)
        out.append(RcParams(r=r, c=c, q_hvac_kw=q, cop=cop, gain_kw=gain, base_kw=base))
    return out


def simulate_thermostat(params_list, tout_min, schedules, tin0=None):
    """Run deadband-controlled buildings over a 1-minute outdoor series.

    Vectorized across buildings; returns (tin, mode) arrays of shape
    (n_buildings, n_minutes).  tin holds the temperature at the START of
    each minute and mode the command applied during it.
    """
    n_b = len(params_list)
    n_t = len(tout_min)
    sp = np.empty((n_b, n_t))
    db = np.empty((n_b, n_t))
    avail = np.empty((n_b, n_t), dtype=bool)
    for b, sch in enumerate(schedules):
        sp[b], db[b], avail[b] = sch.per_minute(n_t)

    r = np.array([p.r for p in params_list])
    c = np.array([p.c for p in params_list])
    q = np.array([p.q_hvac_kw for p in params_list])
    amp = np.array([p.gain_kw for p in params_list])
    decay = np.exp(-1.0 / (60.0 * r * c))

    minutes = np.arange(n_t, dtype=np.float64)
    gain_t = diurnal_gain(minutes % MIN_PER_DAY, 1.0)  # unit profile, scaled per building

    tin = np.empty((n_b, n_t))
    mode = np.zeros((n_b, n_t), dtype=np.int8)
    cur = np.array(
        [sp[b, 0] for b in range(n_b)] if tin0 is None else tin0, dtype=np.float64
    )
    prev = np.zeros(n_b, dtype=np.int8)
    half = db / 2.0
    for t in range(n_t):
        tin[:, t] = cur
        m = np.where(cur > sp[:, t] + half[:, t], 1,
                     np.where(cur < sp[:, t] - half[:, t], 0, prev))
        m = np.where(avail[:, t], m, 0).astype(np.int8)
        mode[:, t] = m
        t_eq = tout_min[t] + r * (amp * gain_t[t] - m * q)
        cur = t_eq + (cur - t_eq) * decay
        prev = m
    return tin, mode


@dataclass
class ThermalDataset:
    """1-minute sequences for every building plus 30-minute window splits.

    Window k starts at sample ``window_starts[k]``: the initial temperature
    is tin[b, start] and the targets are the following WINDOW_MIN samples.
    ``split_codes[b, k]`` assigns window k of building b to train (0),
    validation (1), or test (2).
    """

    tin: np.ndarray  # (n_buildings, T) C
    tout: np.ndarray  # (T,) C
    mode: np.ndarray  # (n_buildings, T) {0,1}
    window_starts: np.ndarray  # (W,)
    split_codes: np.ndarray  # (n_buildings, W) in {0,1,2}
    available_days: np.ndarray  # (n_buildings, n_days) bool
    seed: int = 0
    window_len: int = WINDOW_MIN
    building_ids: tuple = ()

    SPLITS = {"train": 0, "val": 1, "test": 2}

    def index_of(self, building_id: str) -> int:
        try:
            return self.building_ids.index(building_id)
        except ValueError:
            raise ConfigError(f"dataset has no building {building_id!r}") from None

    @property
    def n_buildings(self) -> int:
        return self.tin.shape[0]

    @property
    def n_windows(self) -> int:
        return len(self.window_starts)

    def windows(self, building: int, split: str):
        """Window tensors (y0, u, g, y_true) for one building and split.

        Shapes: y0 (W,), u (W, H), g (W, H), y_true (W, H) with H the window
        length; u/g/y_true cover steps 1..H after each window's start.
        """
        code = self.SPLITS[split]
        starts = self.window_starts[self.split_codes[building] == code]
        h = self.window_len
        idx = starts[:, None] + np.arange(1, h + 1)[None, :]
        y0 = self.tin[building, starts]
        u = self.mode[building][idx].astype(np.float64)
        g = self.tout[idx]
        y_true = self.tin[building][idx]
        return y0, u, g, y_true


def generate_dataset(buildings, weather_min, seed,
                     days: int = DATASET_DAYS) -> ThermalDataset:
    """Simulate ``days`` of randomized-thermostat operation at 1-minute steps.

    ``buildings`` is a list of RcParams or a dict of id -> RcParams (taken in
    sorted-id order).  ``weather_min`` must cover the full span at 1-minute
    resolution (use profiles.to_minutes to resample coarser inputs).  Windows
    are shuffled per building and split 70/20/10 into train/validation/test.
    """
    if isinstance(buildings, dict):
        ids = tuple(sorted(buildings))
        buildings = [buildings[i] for i in ids]
    else:
        ids = tuple(f"b{i:02d}" for i in range(len(buildings)))
    n_t = days * MIN_PER_DAY
    weather_min = np.asarray(weather_min, dtype=np.float64)
    if len(weather_min) < n_t:
        raise ConfigError(
            f"weather covers {len(weather_min)} minutes, need {n_t} ({days} days)"
        )
    weather_min = weather_min[:n_t]
    schedules = [
        generate_training_schedule(substream(seed, "schedule", b), days)
        for b in range(len(buildings))
    ]
    tin, mode = simulate_thermostat(buildings, weather_min, schedules)

    n_w = (n_t - 1) // WINDOW_MIN  # each window needs WINDOW_MIN+1 samples
    starts = np.arange(n_w) * WINDOW_MIN
    codes = np.empty((len(buildings), n_w), dtype=np.int8)
    n_train = int(0.7 * n_w)
    n_val = int(0.2 * n_w)
    for b in range(len(buildings)):
        order = substream(seed, "split", b).permutation(n_w)
        codes[b, order[:n_train]] = 0
        codes[b, order[n_train:n_train + n_val]] = 1
        codes[b, order[n_train + n_val:]] = 2
    avail = np.stack([sch.available_days for sch in schedules])
    return ThermalDataset(
        tin=tin, tout=weather_min, mode=mode,
        window_starts=starts, split_codes=codes,
        available_days=avail, seed=int(seed), building_ids=ids,
    )


def save_dataset(ds: ThermalDataset, path) -> None:
    np.savez_compressed(
        path,
        tin=ds.tin, tout=ds.tout, mode=ds.mode,
        window_starts=ds.window_starts, split_codes=ds.split_codes,
        available_days=ds.available_days,
        building_ids=np.array(ds.building_ids, dtype="U16"),
        meta=np.array([ds.seed, ds.window_len], dtype=np.int64),
    )


def load_dataset(path) -> ThermalDataset:
    with np.load(path) as z:
        return ThermalDataset(
            tin=z["tin"], tout=z["tout"], mode=z["mode"],
            window_starts=z["window_starts"], split_codes=z["split_codes"],
            available_days=z["available_days"],
            seed=int(z["meta"][0]), window_len=int(z["meta"][1]),
            building_ids=tuple(str(s) for s in z["building_ids"]),
        )

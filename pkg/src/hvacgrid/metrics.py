"""Evaluation metrics over co-simulation results and scenario comparisons.

All functions are pure: recomputing a report from the same results yields
identical numbers.  The headline quantities are the voltage fluctuation
index (mean absolute per-step change of a voltage series), ANSI-band
violation events, regulator tap-change counts, grid-draw energy, and
comfort violations in degree-minutes.  Percent deltas between scenarios are
reported as reductions, (base - case) / base.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .cosim import ResultsStore
from .errors import InputShapeError

ANSI_LO = 0.95
ANSI_HI = 1.05


def vfi(v_series) -> float:
    """Voltage fluctuation index: sum |V_i - V_{i-1}| / (N - 1)."""
    v = np.asarray(v_series, dtype=np.float64)
    if v.ndim != 1 or len(v) < 2:
        raise InputShapeError("need a series of at least two samples")
    return float(np.abs(np.diff(v)).sum() / (len(v) - 1))


@dataclass(frozen=True)
class ViolationEvent:
    start_min: int
    duration_min: int
    worst_pu: float


def violation_stats(v_series, lo: float = ANSI_LO, hi: float = ANSI_HI,
                    dt_min: float = 1.0) -> list:
    """Maximal contiguous runs outside [lo, hi] with duration and worst value."""
    v = np.asarray(v_series, dtype=np.float64)
    if v.ndim != 1 or len(v) == 0:
        raise InputShapeError("need a non-empty series")
    out = np.flatnonzero((v < lo) | (v > hi))
    events = []
    if len(out) == 0:
        return events
    run_start = out[0]
    prev = out[0]
    for i in list(out[1:]) + [None]:
        if i is not None and i == prev + 1:
            prev = i
            continue
        seg = v[run_start:prev + 1]
        dist = np.maximum(seg - hi, lo - seg)
        worst = seg[int(np.argmax(dist))]
        events.append(ViolationEvent(
            start_min=int(run_start * dt_min),
            duration_min=int((prev - run_start + 1) * dt_min),
            worst_pu=float(worst),
        ))
        if i is not None:
            run_start = prev = i
    return events


def tap_change_count(tap_series) -> int:
    """Total tap travel: multi-step moves count one per step."""
    taps = np.asarray(tap_series)
    if len(taps) < 2:
        return 0
    return int(np.abs(np.diff(taps)).sum())


def net_energy(p_series, dt_min: float) -> float:
    """Energy drawn from the grid in kWh: sum max(P, 0) * dt / 60."""
    p = np.asarray(p_series, dtype=np.float64)
    return float(np.maximum(p, 0.0).sum() * dt_min / 60.0)


def net_energy_signed(p_series, dt_min: float) -> float:
    """Signed net energy in kWh (draw minus export)."""
    p = np.asarray(p_series, dtype=np.float64)
    return float(p.sum() * dt_min / 60.0)


def comfort_violation(tin_series, y_min: float, y_max: float,
                      dt_min: float = 1.0) -> float:
    """Degree-minutes spent outside [y_min, y_max]."""
    t = np.asarray(tin_series, dtype=np.float64)
    over = np.maximum(0.0, t - y_max)
    under = np.maximum(0.0, y_min - t)
    return float((over + under).sum() * dt_min)


@dataclass
class MetricReport:
    vfi_pu: dict  # bus -> index
    violations: dict  # bus -> [ViolationEvent]
    tap_changes: dict  # regulator -> count
    draw_kwh: dict  # bus -> grid-draw energy
    net_kwh: dict  # bus -> signed net energy
    comfort_cmin: dict  # building -> degree-minutes

    @property
    def violation_count(self) -> int:
        return sum(len(ev) for ev in self.violations.values())


def build_report(res: ResultsStore, dt_min: float = 1.0) -> MetricReport:
    """Compute every metric from one scenario's results.

    Comfort uses the per-building bounds recorded by the run (results meta);
    buildings without recorded bounds are skipped.
    """
    bounds = res.meta.get("bounds", {})
    return MetricReport(
        vfi_pu={b: vfi(res.v_pu[:, i]) for i, b in enumerate(res.bus_ids)},
        violations={b: violation_stats(res.v_pu[:, i], dt_min=dt_min)
                    for i, b in enumerate(res.bus_ids)},
        tap_changes={r: tap_change_count(res.taps[:, i])
                     for i, r in enumerate(res.reg_names)},
        draw_kwh={b: net_energy(res.bus_p_kw[:, i], dt_min)
                  for i, b in enumerate(res.bus_ids)},
        net_kwh={b: net_energy_signed(res.bus_p_kw[:, i], dt_min)
                 for i, b in enumerate(res.bus_ids)},
        comfort_cmin={
            bid: comfort_violation(res.tin_c[:, i], *bounds[bid], dt_min=dt_min)
            for i, bid in enumerate(res.building_ids) if bid in bounds
        },
    )


def reduction_pct(base: float, case: float) -> float:
    """Percent reduction (base - case) / base; nan when base is zero."""
    if base == 0.0:
        return 0.0 if case == 0.0 else float("nan")
    return 100.0 * (base - case) / base


@dataclass
class Comparison:
    rows: list  # (metric, entity, base, case, delta_pct)
    summary: dict


def compare_scenarios(base: MetricReport, case: MetricReport) -> Comparison:
    """Paired per-entity reductions plus cross-entity averages/totals."""
    for attr in ("vfi_pu", "tap_changes", "draw_kwh", "comfort_cmin"):
        if set(getattr(base, attr)) != set(getattr(case, attr)):
            raise InputShapeError(f"entity sets differ for {attr}")
    rows = []
    for metric, b_map, c_map in (
        ("vfi", base.vfi_pu, case.vfi_pu),
        ("tap_changes", base.tap_changes, case.tap_changes),
        ("draw_kwh", base.draw_kwh, case.draw_kwh),
        ("net_kwh", base.net_kwh, case.net_kwh),
        ("comfort_cmin", base.comfort_cmin, case.comfort_cmin),
    ):
        for ent in b_map:
            rows.append((metric, ent, float(b_map[ent]), float(c_map[ent]),
                         reduction_pct(b_map[ent], c_map[ent])))
    rows.append(("violation_events", "system",
                 float(base.violation_count), float(case.violation_count),
                 reduction_pct(base.violation_count, case.violation_count)))

    vfi_pcts = [reduction_pct(base.vfi_pu[b], case.vfi_pu[b]) for b in base.vfi_pu]
    vfi_pcts = [p for p in vfi_pcts if np.isfinite(p)]
    taps_base = sum(base.tap_changes.values())
    taps_case = sum(case.tap_changes.values())
    summary = {
        "vfi_avg_reduction_pct": float(np.mean(vfi_pcts)) if vfi_pcts else 0.0,
        "tap_total_base": float(taps_base),
        "tap_total_case": float(taps_case),
        "tap_total_reduction_pct": reduction_pct(taps_base, taps_case),
        "draw_total_reduction_pct": reduction_pct(
            sum(base.draw_kwh.values()), sum(case.draw_kwh.values())),
        "violation_events_base": float(base.violation_count),
        "violation_events_case": float(case.violation_count),
    }
    return Comparison(rows=rows, summary=summary)


def export_comparison(comp: Comparison, base_res: ResultsStore,
                      case_res: ResultsStore, out_dir) -> None:
    """Write comparison.csv plus per-figure plot-data files."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "comparison.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["metric", "entity", "base", "case", "delta_pct"])
        for metric, ent, b, cse, d in comp.rows:
            w.writerow([metric, ent, "%.17g" % b, "%.17g" % cse, "%.17g" % d])
        for key, val in sorted(comp.summary.items()):
            w.writerow(["summary", key, "", "", "%.17g" % val])

    def dump(name, header, rows):
        with open(os.path.join(out_dir, name), "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(header)
            w.writerows(rows)

    dump("vfi_by_bus.csv", ["bus", "base", "case"], (
        (b, "%.17g" % comp_row[2], "%.17g" % comp_row[3])
        for b, comp_row in ((r[1], r) for r in comp.rows if r[0] == "vfi")
    ))
    dump("energy_by_bus.csv", ["bus", "base_draw_kwh", "case_draw_kwh", "reduction_pct"], (
        (r[1], "%.17g" % r[2], "%.17g" % r[3], "%.17g" % r[4])
        for r in comp.rows if r[0] == "draw_kwh"
    ))
    dump("taps_by_regulator.csv", ["reg", "base", "case"], (
        (r[1], "%d" % r[2], "%d" % r[3]) for r in comp.rows if r[0] == "tap_changes"
    ))
    dump("voltage_envelope.csv",
         ["t_min", "base_vmin", "base_vmax", "case_vmin", "case_vmax"], (
             (int(t), "%.17g" % base_res.v_pu[i].min(), "%.17g" % base_res.v_pu[i].max(),
              "%.17g" % case_res.v_pu[i].min(), "%.17g" % case_res.v_pu[i].max())
             for i, t in enumerate(base_res.t_min)
         ))
    dump("system_load.csv", ["t_min", "base_total_kw", "case_total_kw"], (
        (int(t), "%.17g" % base_res.bus_p_kw[i].sum(), "%.17g" % case_res.bus_p_kw[i].sum())
        for i, t in enumerate(base_res.t_min)
    ))

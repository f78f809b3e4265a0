#!/usr/bin/env python3
"""Regenerate the bundled reference assets in src/hvacgrid/assets/.

The feeder is a balanced positive-sequence rendering of the IEEE 34-bus
test feeder: published segment lengths, per-configuration positive-sequence
impedance approximations, the 24.9/4.16 kV transformer and the 4.16 kV
tail folded into equivalent ohms on the 24.9 kV base, two line regulators,
and two current-switched capacitor banks.  Midpoint buses host the
distributed residential loads; building counts, scaling factors, and PV
ratings follow the deployment table the study reports.
"""

import os
import sys

import numpy as np
import yaml

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from hvacgrid import building, profiles  # noqa: E402
from hvacgrid.cosim import save_buildings_csv  # noqa: E402

ASSETS = os.path.join(os.path.dirname(__file__), "..", "src", "hvacgrid", "assets")

FT_PER_MILE = 5280.0

# Positive-sequence impedance per mile for the feeder's wire configurations.
Z_PER_MILE = {
    300: (1.12, 0.87),   # 3-ph 1/0 ACSR backbone
    301: (1.69, 0.88),   # 3-ph #2 6/1 ACSR
    302: (2.55, 0.90),   # 1-ph #4 lateral
    303: (2.55, 0.90),
    304: (1.69, 0.88),
}

# (from, to, length_ft, config); "mid*" buses split the segments that carry
# distributed residential loads at their midpoint.
SEGMENTS = [
    ("800", "802", 2580, 300),
    ("802", "mid806", 865, 300),
    ("mid806", "806", 865, 300),
    ("806", "808", 32230, 300),
    ("808", "810", 5804, 303),
    ("808", "812", 37500, 300),
    ("812", "814", 29730, 300),
    ("814", "850", 10, 301),      # regulator 1
    ("850", "816", 310, 301),
    ("816", "818", 1710, 302),
    ("818", "mid820", 24075, 302),
    ("mid820", "820", 24075, 302),
    ("820", "mid822", 6870, 302),
    ("mid822", "822", 6870, 302),
    ("816", "824", 10210, 301),
    ("824", "mid826", 1515, 303),
    ("mid826", "826", 1515, 303),
    ("824", "828", 840, 301),
    ("828", "830", 20440, 301),
    ("830", "854", 520, 301),
    ("854", "856", 23330, 303),
    ("854", "852", 36830, 301),
    ("852", "832", 10, 301),      # regulator 2
    ("832", "858", 4900, 301),
    ("858", "864", 1620, 302),
    ("858", "834", 5830, 301),
    ("834", "842", 280, 301),
    ("842", "844", 1350, 301),
    ("844", "846", 3640, 301),
    ("846", "848", 530, 301),
    ("834", "mid860", 1010, 301),
    ("mid860", "860", 1010, 301),
    ("860", "mid836", 1340, 301),
    ("mid836", "836", 1340, 301),
    ("836", "840", 860, 301),
    ("836", "862", 280, 301),
    ("862", "mid838", 2430, 304),
    ("mid838", "838", 2430, 304),
]

# 24.9/4.16 kV 500 kVA transformer (1.9 + j4.08 % on its own base) and the
# 4.16 kV 888-890 run, both expressed in ohms seen from the 24.9 kV side.
XFM_OHMS = (23.56, 50.60)
SEG_888_890_OHMS = (80.2, 62.3)

# Residential deployment: load name, bus, model count, scaling factor,
# PV rating kW (0 = none), PV model count.
RESIDENTIAL = [
    ("S860", "860", 3, 8, 27.0, 1),
    ("S840", "840", 3, 7, 15.0, 1),
    ("S844", "844", 15, 4, 175.0, 3),
    ("S848", "848", 3, 8, 35.0, 1),
    ("S890", "890", 15, 4, 155.0, 3),
    ("D802_806b", "mid806", 3, 8, 12.0, 1),
    ("D802_806c", "mid806", 3, 7, 11.0, 1),
    ("D818_820a", "mid820", 3, 9, 16.0, 1),
    ("D820_822a", "mid822", 3, 18, 56.0, 1),
    ("D824_826b", "mid826", 3, 11, 21.0, 1),
    ("D834_860c", "mid860", 3, 15, 32.0, 1),
    ("D860_836a", "mid836", 3, 8, 12.0, 1),
    ("D860_836c", "mid836", 3, 12, 18.0, 1),
    ("D863_838b", "mid838", 3, 8, 10.0, 1),
]

# Non-residential remainder: kept on the default daily curve.
STATIC = [
    ("S844_static", "844", 176.0),
    ("S890_static", "890", 150.0),
    ("S830_static", "830", 45.0),
    ("S824_static", "824", 50.0),
    ("S810_static", "810", 30.0),
    ("S856_static", "856", 25.0),
    ("S864_static", "864", 20.0),
    ("S842_static", "842", 40.0),
    ("S846_static", "846", 40.0),
]

N_BUILDING_MODELS = 18
BUILDINGS_SEED = 20260801
IRRADIANCE_DAY_SEED = 7
IRRADIANCE_TRAIN_SEED = 3
WEATHER_TRAIN_SEED = 5
SCENARIO_SEED = 11


def make_feeder():
    buses = {"800"}
    lines = []
    for fr, to, ft, cfg in SEGMENTS:
        buses.update((fr, to))
        r_mi, x_mi = Z_PER_MILE[cfg]
        miles = ft / FT_PER_MILE
        reg = ""
        if (fr, to) == ("814", "850"):
            reg = "reg814_850"
        elif (fr, to) == ("852", "832"):
            reg = "reg852_832"
        line = {"from": fr, "to": to,
                "r_ohm": round(r_mi * miles, 4), "x_ohm": round(x_mi * miles, 4)}
        if reg:
            line["regulator"] = reg
        lines.append(line)
    lines.append({"from": "832", "to": "888",
                  "r_ohm": XFM_OHMS[0], "x_ohm": XFM_OHMS[1]})
    lines.append({"from": "888", "to": "890",
                  "r_ohm": SEG_888_890_OHMS[0], "x_ohm": SEG_888_890_OHMS[1]})
    buses.update(("888", "890"))

    model_cycle = [f"b{i:02d}" for i in range(N_BUILDING_MODELS)]
    loads = []
    pvs = []
    cursor = 0
    for li, (name, bus, count, sf, pv_kw, n_pv) in enumerate(RESIDENTIAL):
        models = [model_cycle[(cursor + j) % N_BUILDING_MODELS] for j in range(count)]
        cursor += count
        loads.append({
            "name": name, "bus": bus, "kind": "building",
            "buildings": models, "scaling_factor": sf, "power_factor": 0.9,
        })
        # Cloud fronts sweep the feeder, so each installation sees the same
        # irradiance shifted by its position along the line.
        base_offset = round(li * 2.5, 1)
        if pv_kw > 0:
            if n_pv == 1:
                pvs.append({"name": f"pv_{name}", "bus": bus,
                            "rating_kw": pv_kw, "load": name,
                            "offset_min": base_offset})
            else:
                for k in range(n_pv):
                    pvs.append({
                        "name": f"pv_{name}_{chr(ord('a') + k)}", "bus": bus,
                        "rating_kw": round(pv_kw / n_pv, 4), "load": name,
                        "group": f"pv_{name}", "offset_min": base_offset,
                    })
    for name, bus, peak in STATIC:
        loads.append({"name": name, "bus": bus, "kind": "static",
                      "peak_kw": peak, "profile": "static", "power_factor": 0.9})

    feeder = {
        "power_base_mva": 2.5,
        "source": {"bus": "800", "v_pu": 1.03},
        "buses": [{"id": b, "base_kv": 24.9} for b in sorted(buses)],
        "lines": lines,
        "regulators": [
            {"name": "reg814_850", "line": "814-850", "step_pu": 0.00625,
             "max_tap": 16, "setpoint_pu": 1.02, "bandwidth_pu": 0.0167,
             "delay_s": 30},
            {"name": "reg852_832", "line": "852-832", "step_pu": 0.00625,
             "max_tap": 16, "setpoint_pu": 1.02, "bandwidth_pu": 0.0167,
             "delay_s": 30},
        ],
        "capbanks": [
            {"name": "cap844", "bus": "844", "kvar": 300,
             "i_on_a": 25, "i_off_a": 15, "delay_s": 300},
            {"name": "cap848", "bus": "848", "kvar": 300,
             "i_on_a": 32, "i_off_a": 20, "delay_s": 300},
        ],
        "loads": loads,
        "pvs": pvs,
    }
    header = (
        "# Balanced positive-sequence rendering of the IEEE 34-bus feeder.\n"
        "# Lines carry series ohms on the 24.9 kV base; the 24.9/4.16 kV\n"
        "# transformer and the 4.16 kV tail are folded into equivalent ohms.\n"
        "# 'mid*' buses split segments so distributed loads sit at midpoints.\n"
        "# Building-backed loads list one model id per instance; PV systems\n"
        "# tied to a load drive that load's controllers, and grouped PV\n"
        "# systems take staggered offsets in the no-sync scenarios.\n"
    )
    with open(os.path.join(ASSETS, "feeder34.yaml"), "w") as f:
        f.write(header)
        yaml.safe_dump(feeder, f, sort_keys=False)


def make_profiles():
    ts, frac = profiles.synth_clear_irradiance(step_min=5)
    ts = np.concatenate([ts, [1500.0]])
    frac = np.concatenate([frac, [0.0]])
    profiles.save_profile_csv(os.path.join(ASSETS, "irradiance_clear.csv"),
                              ts, frac, "irradiance_frac")

    # Reference day: broken cumulus moving through, sampled at 1 minute so
    # cloud edges arrive as sharp steps the way field irradiance data does.
    ts, frac = profiles.synth_cloudy_irradiance(
        IRRADIANCE_DAY_SEED, step_min=1, gap_min=(25.0, 90.0),
        width_min=(8.0, 25.0), depth=(0.45, 0.85))
    ts = np.concatenate([ts, [1500.0]])
    frac = np.concatenate([frac, [0.0]])
    profiles.save_profile_csv(os.path.join(ASSETS, "irradiance_cloudy.csv"),
                              ts, frac, "irradiance_frac")

    # Training irradiance flickers faster than the reference day so policy
    # windows see plenty of PV transitions at every horizon position.
    ts, frac = profiles.synth_cloudy_irradiance(
        IRRADIANCE_TRAIN_SEED, step_min=1, n_days=building.DATASET_DAYS + 1,
        gap_min=(5.0, 25.0), width_min=(4.0, 15.0), depth=(0.3, 0.8))
    profiles.save_profile_csv(os.path.join(ASSETS, "irradiance_train.csv"),
                              ts, frac, "irradiance_frac")

    ts, tout = profiles.synth_reference_day_weather(step_min=5)
    profiles.save_profile_csv(os.path.join(ASSETS, "weather_day.csv"),
                              ts, tout, "tout_c")

    ts, tout = profiles.synth_weather_days(
        WEATHER_TRAIN_SEED, building.DATASET_DAYS + 1, step_min=5)
    profiles.save_profile_csv(os.path.join(ASSETS, "weather_train.csv"),
                              ts, tout, "tout_c")

    ts, frac = profiles.synth_static_profile(step_min=15)
    profiles.save_profile_csv(os.path.join(ASSETS, "static_profile.csv"),
                              ts, frac, "frac")


def make_buildings():
    models = building.random_buildings(N_BUILDING_MODELS, BUILDINGS_SEED)
    by_id = {f"b{i:02d}": m for i, m in enumerate(models)}
    save_buildings_csv(by_id, os.path.join(ASSETS, "buildings.csv"))


def make_scenarios():
    for control in ("baseline", "dpc"):
        for sync in ("nosync", "sync"):
            doc = {
                "feeder": "feeder34.yaml",
                "buildings": "buildings.csv",
                "bundle_dir": "models",
                "control_mode": control,
                "sync_mode": sync,
                "weather": "weather_day.csv",
                "irradiance": "irradiance_cloudy.csv",
                "static_profile": "static_profile.csv",
                "seed": SCENARIO_SEED,
                "duration_min": 1440,
            }
            name = f"scenario_{control}_{sync}.yaml"
            with open(os.path.join(ASSETS, name), "w") as f:
                f.write("# Reference scenario: variable-cloud July day on the 34-bus feeder.\n"
                        "# bundle_dir is usually overridden with `simulate --models`.\n")
                yaml.safe_dump(doc, f, sort_keys=False)


def main():
    os.makedirs(ASSETS, exist_ok=True)
    make_feeder()
    make_profiles()
    make_buildings()
    make_scenarios()
    print("assets written to", ASSETS)


if __name__ == "__main__":
    main()

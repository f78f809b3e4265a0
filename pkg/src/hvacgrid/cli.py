"""Command-line pipeline: gen-data, train, simulate, report.

Every stochastic stage takes one seed and derives named substreams from it,
so results are reproducible end to end and adding buildings never disturbs
existing draws.  Artifacts embed the seed and a hash of their configuration;
manifests contain no timestamps, so equal configurations produce identical
files.  Exit codes: 0 success, 2 configuration/dependency problems,
3 numeric or power-flow failures.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__, building, cosim, dpc, metrics, nn, node, profiles
from .errors import ConfigError, DependencyError, DivergenceError, NumericError
from .feeder import load_feeder_config
from .rngs import substream

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path, payload) -> None:
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def asset_path(name: str) -> str:
    return os.path.join(os.path.dirname(os.path.abspath(__file__)), "assets", name)


def _require(path, what) -> str:
    if not path or not os.path.exists(path):
        raise DependencyError(f"missing {what}: {path!r}")
    return path


def cmd_gen_data(args) -> int:
    weather_path = _require(args.weather, "weather CSV")
    buildings_path = _require(args.buildings, "buildings CSV")
    models = cosim.load_buildings_csv(buildings_path)
    n_min = args.days * building.MIN_PER_DAY
    ts, vals = profiles.load_profile_csv(weather_path, "tout_c")
    if ts[-1] + 1 < n_min:
        raise ConfigError(
            f"weather ends at minute {ts[-1]:.0f}, need {n_min} ({args.days} days)"
        )
    weather_min = profiles.to_minutes(ts, vals, n_min)
    ds = building.generate_dataset(models, weather_min, seed=args.seed, days=args.days)
    os.makedirs(args.out, exist_ok=True)
    data_path = os.path.join(args.out, "dataset.npz")
    building.save_dataset(ds, data_path)
    h = hashlib.sha256()
    for arr in (ds.tin, ds.tout, ds.mode, ds.window_starts, ds.split_codes):
        h.update(np.ascontiguousarray(arr).tobytes())
    n_w = ds.n_windows
    manifest = {
        "seed": args.seed,
        "days": args.days,
        "building_ids": list(ds.building_ids),
        "n_windows": n_w,
        "split_sizes": {"train": int(0.7 * n_w), "val": int(0.2 * n_w),
                        "test": n_w - int(0.7 * n_w) - int(0.2 * n_w)},
        "window_len_min": ds.window_len,
        "data_sha256": h.hexdigest(),
        "weather_sha256": _sha256_file(weather_path),
        "buildings_sha256": _sha256_file(buildings_path),
        "version": __version__,
    }
    _write_json(os.path.join(args.out, "manifest.json"), manifest)
    print(f"dataset: {len(ds.building_ids)} buildings x {args.days} days, "
          f"{n_w} windows -> {data_path}")
    return EXIT_OK


def _train_one_node(ds, idx, hyper, seed, models_dir):
    model, report = node.train_node(ds, idx, hyper=hyper, seed=seed)
    bid = ds.building_ids[idx]
    node.save_node(model, os.path.join(models_dir, f"node_{bid}.txt"))
    _write_json(os.path.join(models_dir, f"node_{bid}.report.json"),
                dataclasses.asdict(report))
    return bid, report


def init_policy(seed, building_index) -> nn.Mlp:
    net = nn.init_mlp(dpc.policy_dims(), substream(seed, "policy-init", building_index))
    return nn.Mlp(net.layer_dims, net.weights, net.biases, True)


def _train_one_policy(ds, idx, classifier, irr_min, seed, models_dir, hyper):
    bid = ds.building_ids[idx]
    node_path = os.path.join(models_dir, f"node_{bid}.txt")
    if not os.path.exists(node_path):
        raise DependencyError(f"thermal model for {bid} not trained: {node_path}")
    thermal = node.load_node(node_path)
    windows = dpc.build_policy_windows(ds, idx, irr_min, seed=seed)
    bundle = dpc.DpcBundle(node=thermal, classifier=classifier,
                           policy=init_policy(seed, idx))
    bundle, report = dpc.train_policy(bundle, windows, seed=seed, hyper=hyper)
    dpc.save_bundle(bundle, os.path.join(models_dir, f"bundle_{bid}.txt"))
    _write_json(os.path.join(models_dir, f"bundle_{bid}.report.json"),
                dataclasses.asdict(report))
    return bid, report


def cmd_train(args) -> int:
    os.makedirs(args.models, exist_ok=True)
    if args.stage in ("node", "policy"):
        data_path = _require(os.path.join(args.data, "dataset.npz"), "dataset (run gen-data)")
        ds = building.load_dataset(data_path)
        indices = range(ds.n_buildings)
        if args.building:
            indices = [ds.index_of(args.building)]

    if args.stage == "node":
        hyper = node.TrainHyper(max_epochs=args.epochs) if args.epochs else node.TrainHyper()
        jobs = [(ds, i, hyper, args.seed, args.models) for i in indices]
        results = _run_jobs(_train_one_node, jobs, args.threads)
        for bid, rep in results:
            print(f"node {bid}: val MAE {rep.mae_norm * 100:.2f}% "
                  f"({rep.mae_c:.3f} C), {rep.epochs_run} epochs, {rep.wall_s:.1f}s")
    elif args.stage == "classifier":
        clf = dpc.train_classifier(args.seed)
        nn.save_mlp(clf, os.path.join(args.models, "classifier.txt"))
        x = np.random.default_rng(0).random(10000)
        p = nn.forward_batch(clf, x[:, None])[:, 0]
        within = float(np.mean(np.abs(p - np.round(x)) <= 0.25))
        _write_json(os.path.join(args.models, "classifier.report.json"),
                    {"stage": "classifier", "seed": args.seed,
                     "within_0.25_fraction": within, "version": __version__})
        print(f"classifier: {within * 100:.2f}% of uniform inputs within 0.25 of round(x)")
    elif args.stage == "policy":
        clf_path = _require(os.path.join(args.models, "classifier.txt"),
                            "classifier (train stage classifier first)")
        classifier = nn.load_mlp(clf_path)
        irr_path = _require(args.irradiance, "training irradiance CSV")
        n_min = ds.tin.shape[1]
        irr_min = profiles.load_minutes(irr_path, "irradiance_frac", n_min)
        hyper = dpc.PolicyHyper(max_epochs=args.epochs) if args.epochs else dpc.PolicyHyper()
        jobs = [(ds, i, classifier, irr_min, args.seed, args.models, hyper)
                for i in indices]
        results = _run_jobs(_train_one_policy, jobs, args.threads)
        for bid, rep in results:
            print(f"policy {bid}: best val loss {rep.best_val_loss:.4f}, "
                  f"{rep.epochs_run} epochs, {rep.wall_s:.1f}s "
                  f"(w1={rep.extra['w1']}, w2={rep.extra['w2']}, wc={rep.extra['wc']})")
    else:
        raise ConfigError(f"unknown training stage {args.stage!r}")
    return EXIT_OK


def _run_jobs(fn, jobs, threads):
    if threads <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
        futs = [pool.submit(fn, *job) for job in jobs]
        return [f.result() for f in futs]


def cmd_simulate(args) -> int:
    sf = cosim.load_scenario(_require(args.scenario, "scenario file"))
    scenario = sf.scenario
    feeder = load_feeder_config(_require(sf.feeder_path, "feeder config"))
    models = cosim.load_buildings_csv(_require(sf.buildings_path, "buildings CSV"))
    bundles = {}
    if scenario.control_mode == "dpc":
        bundle_dir = args.models or sf.bundle_dir
        _require(bundle_dir, "bundle directory (--models)")
        needed = set()
        for load in feeder.loads:
            needed.update(load.building_models)
        for mid in sorted(needed):
            path = os.path.join(bundle_dir, f"bundle_{mid}.txt")
            if not os.path.exists(path):
                raise DependencyError(f"missing trained bundle: {path}")
            bundles[mid] = dpc.load_bundle(path)
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)

    res = cosim.run_scenario(feeder, models, bundles, scenario)
    cosim.export_results(res, args.out)
    cfg_hash = hashlib.sha256()
    for path in (args.scenario, sf.feeder_path, sf.buildings_path):
        cfg_hash.update(_sha256_file(path).encode())
    manifest = {
        "seed": scenario.seed,
        "control_mode": scenario.control_mode,
        "sync_mode": scenario.sync_mode,
        "duration_min": scenario.duration_min,
        "config_sha256": cfg_hash.hexdigest(),
        "pv_offsets_min": res.meta["pv_offsets"],
        "achieved_peak_kw": res.meta["achieved_peak_kw"],
        "version": __version__,
    }
    _write_json(os.path.join(args.out, "manifest.json"), manifest)
    worst = float(np.min(res.v_pu)), float(np.max(res.v_pu))
    print(f"simulated {scenario.duration_min} min, {len(res.bus_ids)} buses; "
          f"voltage range [{worst[0]:.4f}, {worst[1]:.4f}] p.u. -> {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    base = cosim.load_results(_require(args.base, "base results directory"))
    case = cosim.load_results(_require(args.case, "case results directory"))
    rep_base = metrics.build_report(base)
    rep_case = metrics.build_report(case)
    comp = metrics.compare_scenarios(rep_base, rep_case)
    metrics.export_comparison(comp, base, case, args.out)
    s = comp.summary
    print(f"VFI: {s['vfi_avg_reduction_pct']:.1f}% average reduction; "
          f"taps {s['tap_total_base']:.0f} -> {s['tap_total_case']:.0f} "
          f"({s['tap_total_reduction_pct']:.1f}%); "
          f"grid draw {s['draw_total_reduction_pct']:.1f}% lower; "
          f"violations {s['violation_events_base']:.0f} -> {s['violation_events_case']:.0f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hvacgrid",
        description="HVAC predictive control and distribution-feeder co-simulation",
    )
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="simulate buildings to build the training dataset")
    g.add_argument("--weather", default=asset_path("weather_train.csv"))
    g.add_argument("--buildings", default=asset_path("buildings.csv"))
    g.add_argument("--days", type=int, default=building.DATASET_DAYS)
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, required=True)
    g.set_defaults(fn=cmd_gen_data)

    t = sub.add_parser("train", help="train thermal models, the classifier, or policies")
    t.add_argument("--stage", choices=["node", "classifier", "policy"], required=True)
    t.add_argument("--data", default="", help="dataset directory from gen-data")
    t.add_argument("--models", required=True, help="model output directory")
    t.add_argument("--irradiance", default=asset_path("irradiance_train.csv"))
    t.add_argument("--building", default="", help="train a single building id")
    t.add_argument("--epochs", type=int, default=0, help="override max epochs")
    t.add_argument("--threads", type=int, default=1)
    t.add_argument("--seed", type=int, required=True)
    t.set_defaults(fn=cmd_train)

    s = sub.add_parser("simulate", help="run a co-simulation scenario")
    s.add_argument("--scenario", required=True)
    s.add_argument("--models", default="", help="bundle directory override")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    s.set_defaults(fn=cmd_simulate)

    r = sub.add_parser("report", help="compare two result directories")
    r.add_argument("--base", required=True)
    r.add_argument("--case", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(fn=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, DependencyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, DivergenceError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()

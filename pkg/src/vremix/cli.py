"""Command-line front end.

Each subcommand reads a study config plus the files written by earlier
subcommands into the ``--out`` directory, and writes its own results there.
Exit codes: 0 success, 1 numerical failure, 2 input or configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import aggregation, analysis, demand, intraday, optimizer, solar, wind
from .config import StudyConfig, load_config, parse_period
from .core import DEFAULT_TECHNOLOGIES, ComponentIndex, HourlySeries, Mix
from .errors import ConfigError, ValidationError, VremixError
from .ingest import (
    Sampling,
    Variable,
    atomic_write_rows,
    atomic_write_text,
    combine_wind_components,
    format_float,
    format_time,
    load_capacities,
    load_capacity_factor_series,
    load_cf_targets,
    load_demand_observations,
    load_grid_metadata,
    load_grid_series,
    load_holidays,
    load_hourly_table,
    write_zonal_series,
)

log = logging.getLogger("vremix")

STRATEGIES = tuple(s.value for s in optimizer.Strategy)


@dataclass
class RunManifest:
    command: str
    version: str
    seed: int | None
    config: dict
    inputs: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def add_input(self, path):
        if path is None:
            return
        path = Path(path)
        if path.is_dir():
            for p in sorted(path.glob("*.csv")):
                self.add_input(p)
            return
        if path.is_file():
            self.inputs[str(path)] = hashlib.sha256(path.read_bytes()).hexdigest()

    def stage(self, name, started):
        self.timings[name] = round(time.perf_counter() - started, 6)

    def write(self, out: Path):
        atomic_write_text(out / f"manifest_{self.command}.json",
                          json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# shared loading helpers

def _zones(cfg: StudyConfig):
    zones = cfg.list("study", "zones")
    if not zones:
        raise ConfigError("[study] zones is empty")
    return zones


def _technologies(cfg: StudyConfig):
    techs = cfg.list("study", "technologies", DEFAULT_TECHNOLOGIES)
    unknown = [t for t in techs if t not in DEFAULT_TECHNOLOGIES]
    if unknown:
        raise ConfigError(f"unsupported technologies {unknown}")
    return techs


def _points(cfg, manifest):
    path = cfg.file("study", "gridpoints")
    manifest.add_input(path)
    return load_grid_metadata(path, _zones(cfg))


def _holidays(cfg, manifest):
    path = cfg.file("study", "holidays", required=False)
    manifest.add_input(path)
    return load_holidays(path) if path else frozenset()


def _seed(args, cfg) -> int:
    return args.seed if args.seed is not None else cfg.int("study", "seed", 0)


def _period(args, cfg):
    text = args.period or cfg.get("study", "period")
    return parse_period(text) if text else None


def _grid(cfg, section, key, variable, manifest, sampling=None, required=True):
    path = cfg.file(section, key, required=required)
    if path is None:
        return None
    manifest.add_input(path)
    sampling = sampling or cfg.get(section, "sampling", "daily")
    return load_grid_series(path, variable, sampling)


def _slice(series, period):
    return series if series is None or period is None else series.slice_dates(*period)


def _temperature_zones(cfg, section, points, manifest, period=None):
    temp = _grid(cfg, section, "temperature", Variable.TEMPERATURE_2M, manifest,
                 sampling=cfg.get(section, "temperature_sampling", "daily"))
    return demand.zone_temperatures(_slice(temp, period), points, _zones(cfg))


def _index(cfg):
    return ComponentIndex.product(_zones(cfg), _technologies(cfg))


def _load_predicted(cfg, out, manifest, period=None):
    cf_path = cfg.file("optimizer", "capacity_factors", required=False) or out / "capacity_factors.csv"
    d_path = cfg.file("optimizer", "demand", required=False) or out / "demand.csv"
    manifest.add_input(cf_path)
    manifest.add_input(d_path)
    cfs = load_capacity_factor_series(cf_path)
    dem = load_demand_observations(d_path)
    if period is not None:
        first = period[0].astype("datetime64[h]")
        last = (period[1] + 1).astype("datetime64[h]") - 1
        cfs = {k: v.slice_time(first, last) for k, v in cfs.items()}
        dem = {k: v.slice_time(first, last) for k, v in dem.items()}
    zones = _zones(cfg)
    missing = [z for z in zones if z not in dem]
    if missing:
        raise ValidationError(f"{d_path}: no demand for zones {missing}")
    total = dem[zones[0]]
    for z in zones[1:]:
        if not dem[z].aligned_with(total):
            raise ValidationError("zonal demand series are not aligned")
        total = total.with_values(total.values + dem[z].values)
    return cfs, total


def _strategies(args, cfg):
    choice = args.strategy or cfg.get("optimizer", "strategies", "all")
    if choice == "all":
        return [optimizer.Strategy(s) for s in STRATEGIES]
    return [optimizer.Strategy(s.strip()) for s in choice.split(",")]


def _total_capacity(args, cfg):
    text = args.total_capacity if args.total_capacity is not None else cfg.get("optimizer", "total_capacity", "none")
    if text.lower() == "none":
        return None
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"total capacity must be a number of MW or 'none', got {text!r}") from None
    if value <= 0:
        raise ConfigError("total capacity must be positive")
    return value


def _frontier_name(strategy, total):
    return f"frontier_{strategy.value}{'_total' if total is not None else ''}.csv"


# --------------------------------------------------------------------------
# subcommands

def cmd_fit_demand(args, cfg, out, manifest):
    t0 = time.perf_counter()
    points = _points(cfg, manifest)
    hol = _holidays(cfg, manifest)
    obs_path = cfg.file("demand", "observations")
    manifest.add_input(obs_path)
    obs = load_demand_observations(obs_path)
    zones = _zones(cfg)
    missing = [z for z in zones if z not in obs]
    if missing:
        raise ValidationError(f"{obs_path}: no observations for zones {missing}")
    fit_period = cfg.get("demand", "fit_period")
    if fit_period:
        first, last = parse_period(fit_period)
        obs = {z: s.slice_time(max(first.astype("datetime64[h]"), s.start),
                               min((last + 1).astype("datetime64[h]") - 1, s.end)) for z, s in obs.items()}
    temps = _temperature_zones(cfg, "demand", points, manifest)
    manifest.stage("load", t0)

    t0 = time.perf_counter()
    params, report = demand.fit(
        {z: obs[z] for z in zones}, temps, hol,
        cfg.grid("demand", "heat_grid", demand.DEFAULT_HEAT_GRID),
        cfg.grid("demand", "cool_grid", demand.DEFAULT_COOL_GRID),
        cfg.int("demand", "cv_blocks", 7),
    )
    manifest.stage("fit", t0)
    demand.write_params(params, out / "demand_params")
    demand.write_report(report, zones, out / "demand_cv_scores.csv")
    lines = [
        "demand model fit",
        f"thresholds: T_H = {params.t_heat:g} C, T_C = {params.t_cool:g} C",
        f"mean cross-validated R2 at chosen thresholds: {report.mean_scores.max():.6f}",
    ]
    for i, z in enumerate(zones):
        lines.append(f"zone {z}: in-sample R2 = {report.r2[z]:.6f}, "
                     f"residual std = {params.noise_std[i]:.6g} MW")
    atomic_write_text(out / "demand_fit_report.txt", "\n".join(lines) + "\n")
    print(lines[1])


def cmd_fit_intraday(args, cfg, out, manifest):
    speed = _grid(cfg, "wind", "training", Variable.WIND_SPEED_10M, manifest, sampling="hourly")
    params = intraday.fit_params(speed)
    intraday.write_params(params, out / "intraday" / "shape.csv", out / "intraday" / "corr.csv")
    print(f"fitted intraday parameters for {len(params.gridpoint_ids)} gridpoints")


def cmd_map_gridpoints(args, cfg, out, manifest):
    targets = _points(cfg, manifest)
    train_path = cfg.file("wind", "training_gridpoints", required=False)
    manifest.add_input(train_path)
    training = load_grid_metadata(train_path) if train_path else targets
    mapping = intraday.nearest_neighbor_mapping(targets, training)
    intraday.write_mapping(out / "intraday" / "mapping.csv", mapping)
    print(f"mapped {len(mapping)} gridpoints")


def _intraday_params(cfg, out, manifest, gridpoint_ids):
    shape = cfg.file("wind", "intraday_shape", required=False) or out / "intraday" / "shape.csv"
    corr = cfg.file("wind", "intraday_corr", required=False) or out / "intraday" / "corr.csv"
    if not shape.exists() or not corr.exists():
        raise ConfigError(
            f"daily wind input requires intraday parameters ({shape}); run fit-intraday first"
        )
    manifest.add_input(shape)
    manifest.add_input(corr)
    params = intraday.read_params(shape, corr)
    if params.gridpoint_ids == tuple(gridpoint_ids):
        return params
    mapping_path = cfg.file("wind", "mapping", required=False) or out / "intraday" / "mapping.csv"
    if not mapping_path.exists():
        raise ConfigError("intraday training gridpoints differ from the wind gridpoints; "
                          "a mapping file is required (see map-gridpoints)")
    manifest.add_input(mapping_path)
    return intraday.remap_params(params, intraday.load_mapping(mapping_path), gridpoint_ids)


def _wind_speed(cfg, manifest):
    if cfg.get("wind", "speed"):
        return _grid(cfg, "wind", "speed", Variable.WIND_SPEED_10M, manifest)
    u = _grid(cfg, "wind", "u", Variable.WIND_U, manifest)
    v = _grid(cfg, "wind", "v", Variable.WIND_V, manifest)
    return combine_wind_components(u, v)


def _daily_flat(series: HourlySeries) -> HourlySeries:
    v = series.values
    return series.with_values(np.repeat(v.reshape(-1, 24).mean(axis=1), 24))


def cmd_predict(args, cfg, out, manifest):
    period = _period(args, cfg)
    daily = args.resolution == "daily"
    seed = _seed(args, cfg)
    points = _points(cfg, manifest)
    hol = _holidays(cfg, manifest)
    zones = _zones(cfg)
    techs = _technologies(cfg)
    raw = {}

    if "wind" in techs:
        t0 = time.perf_counter()
        speed = _slice(_wind_speed(cfg, manifest), period)
        density = {k: _slice(_grid(cfg, "wind", k, var, manifest, required=False), period)
                   for k, var in (("temperature", Variable.TEMPERATURE_2M),
                                  ("pressure", Variable.SURFACE_PRESSURE),
                                  ("humidity", Variable.SPECIFIC_HUMIDITY))}
        curve_path = cfg.file("wind", "power_curve", required=False)
        manifest.add_input(curve_path)
        curve = wind.load_power_curve(curve_path)
        sampler = None
        if speed.sampling is Sampling.DAILY and not daily:
            sampler = intraday.IntradaySampler(_intraday_params(cfg, out, manifest, speed.gridpoint_ids), seed)
        power = wind.hourly_wind_power(
            speed, curve, sampler=sampler, intraday=not daily,
            z_ref=cfg.float("wind", "reference_height", 10.0),
            z_hub=cfg.float("wind", "hub_height", 101.0),
            exponent=cfg.float("wind", "shear_exponent", 1 / 7),
            **density,
        )
        for z, s in aggregation.aggregate_zone(power, curve.nominal_power, points, zones).items():
            raw[(z, "wind")] = s
        manifest.stage("wind", t0)

    if "pv" in techs:
        t0 = time.perf_counter()
        consts = solar.PvConstants.from_mapping(cfg.section("pv"))
        irr = _slice(_grid(cfg, "pv", "irradiance", Variable.SURFACE_IRRADIANCE, manifest), period)
        temp = _slice(_grid(cfg, "pv", "temperature", Variable.TEMPERATURE_2M, manifest,
                            sampling=cfg.get("pv", "temperature_sampling", irr.sampling.value)), period)
        pv_wind = _slice(_grid(cfg, "pv", "wind", Variable.WIND_SPEED_10M, manifest,
                               sampling=cfg.get("pv", "wind_sampling", irr.sampling.value)), period)
        power = solar.hourly_pv_power(irr, temp, pv_wind, points, consts)
        for z, s in aggregation.aggregate_zone(power, consts.nominal_power, points, zones).items():
            raw[(z, "pv")] = _daily_flat(s) if daily else s
        manifest.stage("pv", t0)

    t0 = time.perf_counter()
    targets_path = cfg.file("study", "cf_targets", required=False)
    manifest.add_input(targets_path)
    keys = [(z, t) for z in zones for t in techs]
    if targets_path:
        corrected = aggregation.correct_all({k: raw[k] for k in keys}, load_cf_targets(targets_path))
        cfs = {k: corrected[k].series for k in keys}
        atomic_write_rows(out / "bias_correction.csv",
                          ["zone", "technology", "factor", "target", "raw_mean", "clip_count"],
                          ([z, t, format_float(c.factor), format_float(c.target),
                            format_float(c.raw_mean), str(c.clip_count)]
                           for (z, t), c in ((k, corrected[k]) for k in keys)))
    else:
        log.warning("no [study] cf_targets: capacity factors are not bias-corrected")
        cfs = {k: raw[k] for k in keys}
    manifest.stage("bias_correction", t0)

    t0 = time.perf_counter()
    params_dir = cfg.file("demand", "params", required=False) or out / "demand_params"
    if not (params_dir / "coefficients.csv").exists():
        raise ConfigError(f"no fitted demand parameters in {params_dir}; run fit-demand first")
    manifest.add_input(params_dir)
    params = demand.read_params(params_dir)
    temps = _temperature_zones(cfg, "demand", points, manifest)
    first = cfs[keys[0]].start.astype("datetime64[D]")
    last = cfs[keys[0]].end.astype("datetime64[D]")
    mode = demand.PredictMode.DAILY if daily else demand.PredictMode(cfg.get("demand", "mode", "deterministic"))
    load = demand.predict(params, temps, hol, mode, seed, first, last, zones)
    manifest.stage("demand", t0)

    for k, s in cfs.items():
        if not s.aligned_with(load[zones[0]]):
            raise ValidationError(f"capacity factors for {k} do not cover the demand period")
    write_zonal_series(out / "capacity_factors.csv", cfs, "cf")
    write_zonal_series(out / "demand.csv", load, "demand_mw")
    print(f"predicted {len(load[zones[0]])} hours for {len(zones)} zones ({'daily' if daily else 'hourly'})")


def cmd_optimize(args, cfg, out, manifest):
    period = parse_period(args.period) if args.period else None
    cfs, total = _load_predicted(cfg, out, manifest, period)
    index = _index(cfg)
    step = args.step if args.step is not None else cfg.float("optimizer", "step", 0.001)
    cap = _total_capacity(args, cfg)
    mu_cap = cfg.float("optimizer", "mu_max_cap", 1.0)
    base = optimizer.assemble_inputs(cfs, total, index)
    for strategy in _strategies(args, cfg):
        t0 = time.perf_counter()
        front = optimizer.compute_frontier(base.masked(strategy), step, cap, mu_cap)
        manifest.stage(strategy.value, t0)
        name = _frontier_name(strategy, cap)
        optimizer.write_frontier(out / name, front, index)
        print(f"{name}: {len(front)} points")


def _load_mix(path, index) -> Mix:
    caps = load_capacities(path)
    if not caps:
        raise ValidationError(f"{path}: mix file has no rows")
    unknown = [k for k in caps if k not in index.pairs]
    if unknown:
        raise ValidationError(f"{path}: components not in the study: {unknown}")
    return Mix(index, [caps.get(k, 0.0) for k in index])


def cmd_analyze(args, cfg, out, manifest):
    cfs, total = _load_predicted(cfg, out, manifest)
    index = _index(cfg)
    cap = _total_capacity(args, cfg)
    conv = cfg.float("analysis", "conv_share", analysis.CONV_SHARE)
    sat = cfg.float("analysis", "sat_share", analysis.SAT_SHARE)
    mix_path = Path(args.mix) if args.mix else cfg.file("analysis", "mix", required=False)
    mix = None
    if mix_path is not None:
        manifest.add_input(mix_path)
        mix = _load_mix(mix_path, index)
    ref_risk_cfg = cfg.float("analysis", "reference_risk")
    base = optimizer.assemble_inputs(cfs, total, index)

    diag_rows, plot_rows, special_rows = [], [], []
    report = [
        "mix diagnostics",
        f"shortage: P(t) < D(t) - {conv:g} * max D; saturation: P(t) > {sat:g} * D(t)",
        "shortage and saturation use the same hourly series as the risk",
        "",
    ]

    def diag(label, strategy, m, inputs):
        d = analysis.evaluate_mix(m, inputs, cfs, total, conv, sat)
        return d, [label, strategy.value, format_float(d.mu), format_float(d.sigma),
                   format_float(d.pv_fraction), format_float(d.shortage_freq), format_float(d.saturation_freq)]

    for strategy in _strategies(args, cfg):
        inputs = base.masked(strategy)
        path = out / _frontier_name(strategy, cap)
        if not path.exists():
            raise ConfigError(f"frontier file {path} not found; run optimize first")
        manifest.add_input(path)
        front = optimizer.read_frontier(path, index, cap)
        report.append(f"[{strategy.value}] {len(front)} frontier points")
        ref = ref_risk_cfg
        if mix is not None:
            d, row = diag("prescribed", strategy, mix, inputs)
            sub = analysis.suboptimality(mix, inputs, cap)
            diag_rows.append(row + ["true" if sub.suboptimal else "false"])
            ref = d.sigma if ref is None else ref
            report.append(
                f"  prescribed mix: mu = {d.mu:.6f}, sigma = {d.sigma:.6f}, PV fraction = {d.pv_fraction:.4f}, "
                f"shortage = {d.shortage_freq:.4f}, saturation = {d.saturation_freq:.4f}")
            report.append(
                f"  optimal risk at the same penetration: {sub.sigma_optimal:.6f}"
                + (f" -> SUBOPTIMAL: lies {100 * sub.excess:.2f}% to the right of the frontier"
                   if sub.suboptimal else " -> on the frontier"))
        for p in front:
            d, row = diag("frontier", strategy, p.w, inputs)
            plot_rows.append([strategy.value, format_float(p.target_mu), *row[2:]])
        if len(front):
            try:
                sp = analysis.special_points(front, ref)
            except VremixError as exc:
                log.warning("%s: %s", strategy.value, exc)
                sp = analysis.special_points(front)
            for label, p in (("min_risk", sp.min_risk), ("max_ratio", sp.max_ratio),
                             ("high_penetration", sp.high_penetration)):
                if p is None:
                    continue
                d, row = diag(label, strategy, p.w, inputs)
                diag_rows.append(row + ["false"])
                special_rows.append([strategy.value, label, format_float(p.target_mu), format_float(p.mu),
                                     format_float(p.sigma), *map(format_float, p.w.w)])
                report.append(f"  {label}: mu = {d.mu:.6f}, sigma = {d.sigma:.6f}, "
                              f"PV fraction = {d.pv_fraction:.4f}, shortage = {d.shortage_freq:.4f}, "
                              f"saturation = {d.saturation_freq:.4f}")
            if cap is None and any(p.sigma > 0 for p in front):
                alpha, dev = optimizer.mean_risk_ratio(front)
                report.append(f"  mean-risk ratio: {alpha:.6f} (max relative deviation {dev:.2e})")
        report.append("")

    cols = ["mu", "sigma", "pv_fraction", "shortage_freq", "saturation_freq"]
    atomic_write_rows(out / "diagnostics.csv", ["label", "strategy", *cols, "suboptimal"], diag_rows)
    atomic_write_rows(out / "plot_data.csv", ["strategy", "target_mu", *cols], plot_rows)
    atomic_write_rows(out / "special_points.csv",
                      ["strategy", "point", "target_mu", "mu", "sigma", *(f"w_{x}" for x in index.labels())],
                      special_rows)
    atomic_write_text(out / "report.txt", "\n".join(report))
    print("\n".join(report).rstrip())


def cmd_spectrum(args, cfg, out, manifest):
    src = cfg.file("analysis", "series", required=False)
    if src is not None:
        manifest.add_input(src)
        series = load_hourly_table(src)
    else:
        cfs, _ = _load_predicted(cfg, out, manifest)
        dem = load_demand_observations(out / "demand.csv")
        series = {f"cf_{z}_{t}": s for (z, t), s in cfs.items()}
        series.update({f"demand_{z}": s for z, s in dem.items()})
    year = cfg.int("analysis", "year_window", analysis.HOURS_PER_YEAR)
    day = cfg.int("analysis", "day_window", 24)
    rows = []
    for name, s in series.items():
        b = analysis.variance_bands(s, year, day)
        if b.degenerate:
            log.warning("series %s has zero variance (degenerate row)", name)
        rows.append([name, format_float(b.interannual_pct), format_float(b.seasonal_pct),
                     format_float(b.intraday_pct)])
    atomic_write_rows(out / "spectrum.csv", ["series", "interannual_pct", "seasonal_pct", "intraday_pct"], rows)
    print(f"spectrum.csv: {len(rows)} series")


def cmd_make_toy(args):
    from .toy import make_toy

    path = make_toy(args.out, seed=args.seed if args.seed is not None else 0)
    print(path)


COMMANDS = {
    "fit-demand": cmd_fit_demand,
    "fit-intraday": cmd_fit_intraday,
    "map-gridpoints": cmd_map_gridpoints,
    "predict": cmd_predict,
    "optimize": cmd_optimize,
    "analyze": cmd_analyze,
    "spectrum": cmd_spectrum,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vremix",
        description="Renewable capacity factors, zonal demand and mean-variance optimal PV/wind mixes.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, config=True):
        p = sub.add_parser(name, help=help_text)
        if config:
            p.add_argument("--config", required=True, help="study INI file")
        p.add_argument("--out", required=True, help="run directory for outputs")
        p.add_argument("--seed", type=int, default=None, help="override [study] seed")
        p.add_argument("-q", "--quiet", action="store_true", help="only log warnings and errors")
        return p

    add("fit-demand", "fit the temperature-response demand model")
    add("fit-intraday", "fit Weibull/copula intraday wind parameters from hourly training data")
    add("map-gridpoints", "nearest-neighbour mapping of study gridpoints to training gridpoints")
    p = add("predict", "hourly zonal demand and bias-corrected capacity factors")
    p.add_argument("--period", help="YYYY, YYYY..YYYY or YYYY-MM-DD..YYYY-MM-DD")
    p.add_argument("--resolution", choices=("hourly", "daily"), default="hourly",
                   help="'daily' holds daily means flat over each day (no intraday variability)")
    p = add("optimize", "mean-variance frontiers per strategy")
    p.add_argument("--strategy", choices=(*STRATEGIES, "all"))
    p.add_argument("--total-capacity", help="total installed capacity in MW, or 'none'")
    p.add_argument("--step", type=float, help="penetration grid step (fraction, e.g. 0.001)")
    p.add_argument("--period", help="restrict inputs, e.g. 2009 for a one-year block")
    p = add("analyze", "diagnostics for frontiers and a prescribed mix")
    p.add_argument("--strategy", choices=(*STRATEGIES, "all"))
    p.add_argument("--total-capacity", help="analyze the frontier computed with this total (MW) or 'none'")
    p.add_argument("--mix", help="prescribed mix CSV zone,technology,capacity_mw")
    add("spectrum", "variance shares by time scale of hourly series")
    add("make-toy", "write the synthetic two-zone toy study into --out", config=False)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    try:
        if args.command == "make-toy":
            cmd_make_toy(args)
            return 0
        cfg = load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        manifest = RunManifest(args.command, __version__, _seed(args, cfg), cfg.snapshot())
        manifest.add_input(cfg.path)
        t0 = time.perf_counter()
        COMMANDS[args.command](args, cfg, out, manifest)
        manifest.stage("total", t0)
        manifest.write(out)
    except VremixError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())

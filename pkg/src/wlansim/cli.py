"""Command-line entry point: single runs, seed/density sweeps, oracles and
simulator-vs-oracle comparison tables (CSV only).

Exit codes: 0 ok, 1 comparison outside tolerance, 2 input errors,
3 runtime contract violations. Failures print one ``error=...`` line on stderr.
"""
from __future__ import annotations

import argparse
import shlex
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .engine import SimulationError
from .layouts import fully_overlapping
from .mac import ContractViolation
from .network import Simulation
from .oracles import bianchi_throughput, ctmn_for_scenario, wlan_mcs
from .phy import PhyMacParams
from .scenario import (ScenarioConfig, ScenarioError, StatsReport, check_writable, format_stats,
                       parse_scenario, parse_system, write_outputs, write_scenario, write_system)

MODES = ("simulate", "oracle-bianchi", "oracle-ctmn", "compare")
SWEEP_HEADER = ("n_wlans,seeds,throughput_mbps_mean,throughput_mbps_std,aggregate_mbps_mean,"
                "aggregate_mbps_std,collision_prob_mean,collision_prob_std,"
                "events_dispatched,wall_clock_s")


class UsageError(ValueError):
    pass


class SweepError(RuntimeError):
    def __init__(self, point: str, cause: Exception):
        super().__init__(f"sweep point {point} failed: {cause}")
        self.point = point
        self.cause = cause

    def __reduce__(self):
        return type(self), (self.point, self.cause)


@dataclass
class RunSpec:
    scenario: str | None = None
    sim_time: float = 10.0
    seed: int = 1
    logs: bool = False
    trace: bool = False
    out: str = "out"
    mode: str = "simulate"
    system: str | None = None
    obstacles: str | None = None
    sweep_wlans: list[int] = field(default_factory=list)
    seeds: list[int] = field(default_factory=list)
    jobs: int = 1
    tolerance: float = 0.10
    collision_tolerance: float = 0.05
    mcs: int | None = None
    n_agg: int | None = None

    def __post_init__(self):
        if not self.sim_time > 0:
            raise UsageError("--time must be positive")
        if self.mode not in MODES:
            raise UsageError(f"unknown mode {self.mode!r}")


# ------------------------------------------------------------------ parsing


def parse_range(text: str) -> list[int]:
    """``"A..B"`` (inclusive) or a comma list; returns sorted unique ints."""
    try:
        if ".." in text:
            lo, hi = (int(v) for v in text.split("..", 1))
            values = list(range(lo, hi + 1))
        else:
            values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A..B or a comma list, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return sorted(set(values))


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return text == "on"


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wlansim", description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", help="node CSV")
    ap.add_argument("--system", help="key,value overrides of the PHY/MAC parameters")
    ap.add_argument("--obstacles", help="wall/floor counts between node pairs")
    ap.add_argument("--time", type=float, default=10.0, help="simulated seconds")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--logs", type=_on_off, default=False, metavar="on|off")
    ap.add_argument("--trace", type=_on_off, default=False, metavar="on|off")
    ap.add_argument("--mode", choices=MODES, default="simulate")
    ap.add_argument("--sweep-wlans", type=parse_range, default=[], metavar="A..B",
                    help="fully overlapping deployments of these sizes")
    ap.add_argument("--seeds", type=parse_range, default=[], metavar="LIST")
    ap.add_argument("--jobs", type=int, default=1, help="parallel sweep points")
    ap.add_argument("--tolerance", type=float, default=0.10,
                    help="relative throughput tolerance for compare")
    ap.add_argument("--collision-tolerance", type=float, default=0.05,
                    help="absolute collision-probability tolerance for compare")
    ap.add_argument("--mcs", type=int, help="fix the MCS (default: from received power)")
    ap.add_argument("--n-agg", type=int, help="MPDUs per A-MPDU")
    return ap


def spec_from_args(ns: argparse.Namespace) -> RunSpec:
    return RunSpec(ns.scenario, ns.time, ns.seed, ns.logs, ns.trace, ns.out, ns.mode, ns.system,
                   ns.obstacles, ns.sweep_wlans, ns.seeds, ns.jobs, ns.tolerance,
                   ns.collision_tolerance, ns.mcs, ns.n_agg)


def load_params(spec: RunSpec) -> PhyMacParams:
    p = parse_system(spec.system) if spec.system else PhyMacParams()
    over = {}
    if spec.mcs is not None:
        over["mcs"] = spec.mcs
    if spec.n_agg is not None:
        over["n_agg"] = spec.n_agg
    return p.with_overrides(**over) if over else p


def load_scenario(spec: RunSpec, params: PhyMacParams) -> ScenarioConfig:
    if not spec.scenario:
        raise UsageError(f"--mode {spec.mode} needs --scenario (or --sweep-wlans)")
    return parse_scenario(spec.scenario, params, spec.obstacles)


# --------------------------------------------------------------------- runs


@dataclass
class PointResult:
    label: str
    seed: int
    report: StatsReport

    @property
    def aggregate(self) -> float:
        return sum(w.throughput for w in self.report.wlans)

    @property
    def per_wlan(self) -> float:
        return self.aggregate / len(self.report.wlans)

    @property
    def collision_prob(self) -> float:
        attempts = sum(w.attempts for w in self.report.wlans)
        failed = sum(w.collision_prob * w.attempts for w in self.report.wlans)
        return failed / attempts if attempts else 0.0


def run_once(cfg: ScenarioConfig, seed: int, sim_time: float, out_dir: str | Path | None,
             trace: bool = False, logs: bool = False) -> StatsReport:
    sim = Simulation(cfg, seed=seed, trace=trace, node_logs=logs)
    report = sim.run(sim_time)
    if out_dir is not None:
        write_outputs(report, out_dir, sim.trace, sim.logs)
    return report


def _point_job(args) -> PointResult:
    label, cfg, seed, sim_time, out_dir, trace, logs = args
    try:
        return PointResult(label, seed, run_once(cfg, seed, sim_time, out_dir, trace, logs))
    except Exception as exc:  # identify the point, keep the cause
        raise SweepError(f"{label} seed={seed}", exc) from exc


def sweep_points(spec: RunSpec, params: PhyMacParams) -> list[tuple[str, int | None, ScenarioConfig]]:
    """``(label, n_wlans, config)`` per sweep point, ordered by axis value."""
    if spec.sweep_wlans:
        if spec.sweep_wlans[0] < 1:
            raise UsageError("--sweep-wlans values must be >= 1")
        return [(f"n={n}", n, fully_overlapping(n, params)) for n in spec.sweep_wlans]
    return [("scenario", None, load_scenario(spec, params))]


def run_sweep(spec: RunSpec, params: PhyMacParams, write: bool = True
              ) -> list[tuple[str, int | None, ScenarioConfig, list[PointResult]]]:
    points = sweep_points(spec, params)
    seeds = spec.seeds or [spec.seed]
    root = Path(spec.out)
    jobs = []
    for label, n, cfg in points:
        point_dir = root / (f"n_{n:03d}" if n is not None else "scenario")
        if write:
            check_writable(point_dir)
            write_scenario(cfg, point_dir / "scenario.csv")
            write_system(cfg.params, point_dir / "system.csv")
        for s in seeds:
            out = point_dir / f"seed_{s}" if write else None
            jobs.append((label, cfg, s, spec.sim_time, out, spec.trace, spec.logs))
    if spec.jobs > 1:
        with ProcessPoolExecutor(spec.jobs) as pool:
            results = list(pool.map(_point_job, jobs))
    else:
        results = [_point_job(j) for j in jobs]
    grouped = []
    for label, n, cfg in points:
        grouped.append((label, n, cfg, [r for r in results if r.label == label]))
    return grouped


def _mean_std(values: list[float]) -> tuple[float, float]:
    return statistics.fmean(values), statistics.stdev(values) if len(values) > 1 else 0.0


def format_sweep(grouped) -> str:
    lines = [SWEEP_HEADER]
    for label, n, cfg, results in grouped:
        per = _mean_std([r.per_wlan / 1e6 for r in results])
        agg = _mean_std([r.aggregate / 1e6 for r in results])
        col = _mean_std([r.collision_prob for r in results])
        events = statistics.fmean(r.report.events_dispatched for r in results)
        wall = statistics.fmean(r.report.wall_clock for r in results)
        lines.append(f"{n if n is not None else len(cfg.wlan_codes)},"
                     f"{';'.join(str(r.seed) for r in results)},"
                     f"{per[0]:.6f},{per[1]:.6f},{agg[0]:.6f},{agg[1]:.6f},"
                     f"{col[0]:.6f},{col[1]:.6f},{events:.1f},{wall:.3f}")
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------------- modes


def cmd_simulate(spec: RunSpec) -> int:
    params = load_params(spec)
    if spec.sweep_wlans or spec.seeds:
        grouped = run_sweep(spec, params)
        table = format_sweep(grouped)
        (Path(spec.out) / "sweep.csv").write_text(table)
        sys.stdout.write(table)
        return 0
    cfg = load_scenario(spec, params)
    report = run_once(cfg, spec.seed, spec.sim_time, spec.out, spec.trace, spec.logs)
    sys.stdout.write(format_stats(report))
    return 0


def bianchi_rows(ns: list[int], params: PhyMacParams, mcs: int) -> list[str]:
    rows = ["n_wlans,tau,p,per_wlan_mbps,aggregate_mbps"]
    for n in ns:
        b = bianchi_throughput(n, params, mcs, params.n_agg,
                               stages=params.cw_stages if params.cw_adaptation else None)
        rows.append(f"{n},{b.tau:.9f},{b.p:.9f},{b.per_wlan_throughput / 1e6:.6f},"
                    f"{b.aggregate_throughput / 1e6:.6f}")
    return rows


def _bianchi_inputs(spec: RunSpec, params: PhyMacParams) -> tuple[list[int], int]:
    if spec.sweep_wlans:
        ns = spec.sweep_wlans
        cfg = fully_overlapping(ns[0], params)
    else:
        cfg = load_scenario(spec, params)
        ns = [len(cfg.wlan_codes)]
    return ns, wlan_mcs(cfg)[0]


def cmd_oracle_bianchi(spec: RunSpec) -> int:
    params = load_params(spec)
    ns, mcs = _bianchi_inputs(spec, params)
    sys.stdout.write("\n".join(bianchi_rows(ns, params, mcs)) + "\n")
    return 0


def cmd_oracle_ctmn(spec: RunSpec) -> int:
    cfg = load_scenario(spec, load_params(spec))
    model, thr = ctmn_for_scenario(cfg)
    lines = ["wlan_code,ctmn_mbps,active_share"]
    share = model.active_probability()
    for k, code in enumerate(model.wlans):
        lines.append(f"{code},{thr[code] / 1e6:.6f},{share[k]:.6f}")
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


def _rel(a: float, b: float) -> float:
    return (a - b) / b if b else (0.0 if a == 0 else float("inf"))


def cmd_compare(spec: RunSpec) -> int:
    params = load_params(spec)
    grouped = run_sweep(spec, params, write=False)
    failed = False
    if spec.sweep_wlans:
        lines = ["n_wlans,simulated_mbps,bianchi_mbps,rel_error,"
                 "simulated_collision,bianchi_collision,abs_error"]
        mcs = wlan_mcs(grouped[0][2])[0]
        for label, n, cfg, results in grouped:
            b = bianchi_throughput(n, params, mcs, params.n_agg)
            sim_thr = statistics.fmean(r.per_wlan for r in results)
            sim_p = statistics.fmean(r.collision_prob for r in results)
            rel, err = _rel(sim_thr, b.per_wlan_throughput), sim_p - b.p
            failed |= abs(rel) > spec.tolerance or abs(err) > spec.collision_tolerance
            lines.append(f"{n},{sim_thr / 1e6:.6f},{b.per_wlan_throughput / 1e6:.6f},{rel:.6f},"
                         f"{sim_p:.6f},{b.p:.6f},{err:.6f}")
    else:
        label, n, cfg, results = grouped[0]
        _, thr = ctmn_for_scenario(cfg)
        lines = ["wlan,simulated_mbps,ctmn_mbps,rel_error"]
        for code in cfg.wlan_codes:
            sim = statistics.fmean(r.report.by_code()[code].throughput for r in results)
            rel = _rel(sim, thr[code])
            failed |= abs(rel) > spec.tolerance
            lines.append(f"{code},{sim / 1e6:.6f},{thr[code] / 1e6:.6f},{rel:.6f}")
    table = "\n".join(lines) + "\n"
    sys.stdout.write(table)
    if spec.out:
        check_writable(spec.out)
        (Path(spec.out) / "compare.csv").write_text(table)
    return 1 if failed else 0


COMMANDS = {"simulate": cmd_simulate, "oracle-bianchi": cmd_oracle_bianchi,
            "oracle-ctmn": cmd_oracle_ctmn, "compare": cmd_compare}


def _error_line(kind: str, message: str, **extra) -> str:
    parts = [f"error={kind}"]
    parts += [f"{k}={shlex.quote(str(v))}" for k, v in extra.items() if v is not None]
    parts.append(f"message={shlex.quote(' '.join(message.split()))}")
    return " ".join(parts)


def run(spec: RunSpec) -> int:
    try:
        return COMMANDS[spec.mode](spec)
    except ScenarioError as exc:
        print(_error_line("parse", exc.message, path=exc.path, line=exc.line,
                          column=exc.column), file=sys.stderr)
        return 2
    except UsageError as exc:
        print(_error_line("input", str(exc)), file=sys.stderr)
        return 2
    except OSError as exc:
        print(_error_line("input", exc.strerror or str(exc), path=exc.filename), file=sys.stderr)
        return 2
    except SweepError as exc:
        kind = "runtime" if isinstance(exc.cause, (SimulationError, ContractViolation)) else "sweep"
        print(_error_line(kind, str(exc.cause), point=exc.point), file=sys.stderr)
        return 3
    except (SimulationError, ContractViolation) as exc:
        print(_error_line("runtime", str(exc)), file=sys.stderr)
        return 3


def main(argv: list[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        spec = spec_from_args(ns)
    except UsageError as exc:
        print(_error_line("input", str(exc)), file=sys.stderr)
        return 2
    return run(spec)


if __name__ == "__main__":
    sys.exit(main())

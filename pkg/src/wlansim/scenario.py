"""Scenario CSV ingestion, statistics and output files."""
from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

from .mac import DcbPolicy
from .phy import ChannelSet, PhyMacParams
from .traffic import TrafficKind, TrafficModel

log = logging.getLogger(__name__)

SCENARIO_HEADER = ("node_code,node_type,wlan_code,x,y,z,primary_channel,min_channel,"
                   "max_channel,tx_power_dbm,cca_dbm,traffic_model,traffic_load,dcb_policy")
SCENARIO_COLUMNS = tuple(SCENARIO_HEADER.split(","))
STATS_HEADER = "wlan_code,throughput_mbps,mean_delay_ms,collision_prob,occupancy"
MAX_CHANNELS = 8


class ScenarioError(ValueError):
    """Invalid scenario input; ``line``/``column`` locate the culprit when known."""

    def __init__(self, message: str, line: int | None = None, column: str | None = None,
                 path: str | None = None):
        where = ""
        if path:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        if column:
            where += f"{column}:"
        super().__init__(f"{where} {message}" if where else message)
        self.message = message
        self.line = line
        self.column = column
        self.path = path

    def __reduce__(self):
        return type(self), (self.message, self.line, self.column, self.path)


class MissingColumn(ScenarioError):
    pass


class BadValue(ScenarioError):
    pass


class DanglingReference(ScenarioError):
    pass


class DuplicateNode(ScenarioError):
    pass


@dataclass(frozen=True)
class NodeConfig:
    node_code: str
    node_type: str  # "AP" or "STA"
    wlan_code: str
    x: float
    y: float
    z: float
    primary_channel: int
    min_channel: int
    max_channel: int
    tx_power_dbm: float = 20.0
    cca_dbm: float = -82.0
    traffic_model: TrafficKind = TrafficKind.FULL_BUFFER
    traffic_load: float = 0.0
    dcb_policy: DcbPolicy = DcbPolicy.OP

    @property
    def is_ap(self) -> bool:
        return self.node_type == "AP"

    @property
    def position(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    @property
    def allocated(self) -> ChannelSet:
        return ChannelSet(self.min_channel, self.max_channel)

    @property
    def traffic(self) -> TrafficModel:
        return TrafficModel(self.traffic_model, self.traffic_load)


@dataclass
class ScenarioConfig:
    nodes: list[NodeConfig]
    params: PhyMacParams = field(default_factory=PhyMacParams)
    # (node_code_a, node_code_b) -> (walls, floors), symmetric
    obstacles: dict[tuple[str, str], tuple[int, int]] = field(default_factory=dict)

    def __post_init__(self):
        validate(self)

    @property
    def wlan_codes(self) -> list[str]:
        seen: dict[str, None] = {}
        for n in self.nodes:
            seen.setdefault(n.wlan_code, None)
        return list(seen)

    def ap_of(self, wlan: str) -> NodeConfig:
        return next(n for n in self.nodes if n.is_ap and n.wlan_code == wlan)

    def stas_of(self, wlan: str) -> list[NodeConfig]:
        return [n for n in self.nodes if not n.is_ap and n.wlan_code == wlan]

    def obstacles_between(self, a: str, b: str) -> tuple[int, int]:
        return self.obstacles.get((a, b)) or self.obstacles.get((b, a)) or (0, 0)


def validate(cfg: ScenarioConfig, lines: dict[str, int] | None = None,
             path: str | None = None) -> None:
    lines = lines or {}

    def err(cls, msg, code=None, column=None):
        return cls(msg, lines.get(code), column, path=path)

    codes: set[str] = set()
    for n in cfg.nodes:
        if n.node_code in codes:
            raise err(DuplicateNode, f"duplicate node_code {n.node_code!r}",
                      n.node_code, "node_code")
        codes.add(n.node_code)
    aps: dict[str, NodeConfig] = {}
    for n in cfg.nodes:
        if n.is_ap:
            if n.wlan_code in aps:
                raise err(ScenarioError, f"WLAN {n.wlan_code!r} has more than one AP",
                          n.node_code, "node_type")
            aps[n.wlan_code] = n
    for n in cfg.nodes:
        c = n.node_code
        if not n.is_ap and n.wlan_code not in aps:
            raise err(DanglingReference, f"STA {c!r} references unknown WLAN "
                      f"{n.wlan_code!r}", c, "wlan_code")
        if not (n.min_channel <= n.primary_channel <= n.max_channel):
            raise err(BadValue, "need min_channel <= primary_channel <= max_channel",
                      c, "primary_channel")
        if n.min_channel < 0 or n.max_channel >= MAX_CHANNELS:
            raise err(BadValue, f"channels must lie in 0..{MAX_CHANNELS - 1}", c,
                      "max_channel")
        if n.is_ap and not n.allocated.is_valid_bond(n.primary_channel):
            raise err(BadValue, "allocation must be an aligned 1/2/4/8-channel block",
                      c, "min_channel")
        if not all(math.isfinite(v) for v in n.position):
            raise err(BadValue, "non-finite position", c, "x")
        if n.is_ap and n.traffic_model is not TrafficKind.FULL_BUFFER and n.traffic_load <= 0:
            raise err(BadValue, "traffic_load must be positive", c, "traffic_load")
    for wlan, ap in aps.items():
        if not any(n.wlan_code == wlan and not n.is_ap for n in cfg.nodes):
            raise err(ScenarioError, f"WLAN {wlan!r} has no STA", ap.node_code)
    pos = [(n.node_code, n.position) for n in cfg.nodes]
    for i, (ca, pa) in enumerate(pos):
        for cb, pb in pos[i + 1:]:
            if math.dist(pa, pb) <= 0:
                raise err(BadValue, f"nodes {ca!r} and {cb!r} are co-located", cb, "x")


def _parse_enum(enum_cls, raw: str, line: int, column: str, path: str | None = None):
    for member in enum_cls:
        if raw.strip().lower() in (member.value.lower(), member.name.lower()):
            return member
    allowed = "|".join(m.value for m in enum_cls)
    raise BadValue(f"bad {column} {raw!r} (expected {allowed})", line, column, path=path)


def _data_rows(fh) -> Iterable[tuple[int, list[str]]]:
    for lineno, row in enumerate(csv.reader(fh), start=1):
        if not row or not any(c.strip() for c in row):
            continue
        if row[0].lstrip().startswith("#"):
            continue
        yield lineno, [c.strip() for c in row]


def parse_scenario(path: str | os.PathLike, params: PhyMacParams | None = None,
                   obstacles_path: str | os.PathLike | None = None) -> ScenarioConfig:
    path = str(path)
    with open(path, newline="") as fh:
        rows = iter(_data_rows(fh))
        try:
            _, header = next(rows)
        except StopIteration:
            raise MissingColumn("empty file: header row required", 1, path=path) from None
        missing = [c for c in SCENARIO_COLUMNS if c not in header]
        if missing:
            raise MissingColumn(f"missing column(s): {', '.join(missing)}", 1,
                                missing[0], path=path)
        extra = [c for c in header if c not in SCENARIO_COLUMNS]
        if extra:
            log.warning("%s: ignoring extra column(s) %s", path, ", ".join(extra))
        idx = {c: header.index(c) for c in SCENARIO_COLUMNS}
        nodes, lines = [], {}
        for lineno, row in rows:
            def cell(col: str) -> str:
                i = idx[col]
                if i >= len(row):
                    raise MissingColumn(f"row has no {col} value", lineno, col, path=path)
                return row[i]

            def num(col: str, cast=float):
                raw = cell(col)
                try:
                    return cast(raw)
                except ValueError:
                    raise BadValue(f"bad {col} {raw!r}", lineno, col, path=path) from None

            node_type = cell("node_type").upper()
            if node_type not in ("AP", "STA"):
                raise BadValue(f"bad node_type {cell('node_type')!r} (expected AP|STA)",
                               lineno, "node_type", path=path)
            traffic = _parse_enum(TrafficKind, cell("traffic_model"), lineno,
                                  "traffic_model", path)
            dcb = _parse_enum(DcbPolicy, cell("dcb_policy"), lineno, "dcb_policy", path)
            code = cell("node_code")
            nodes.append(NodeConfig(
                node_code=code, node_type=node_type, wlan_code=cell("wlan_code"),
                x=num("x"), y=num("y"), z=num("z"),
                primary_channel=num("primary_channel", int),
                min_channel=num("min_channel", int), max_channel=num("max_channel", int),
                tx_power_dbm=num("tx_power_dbm"), cca_dbm=num("cca_dbm"),
                traffic_model=traffic, traffic_load=num("traffic_load"), dcb_policy=dcb))
            lines.setdefault(code, lineno)
    obstacles = parse_obstacles(obstacles_path) if obstacles_path else {}
    cfg = ScenarioConfig.__new__(ScenarioConfig)
    cfg.nodes, cfg.params, cfg.obstacles = nodes, params or PhyMacParams(), obstacles
    validate(cfg, lines, path)
    return cfg


def parse_obstacles(path: str | os.PathLike) -> dict[tuple[str, str], tuple[int, int]]:
    """Optional ``node_a,node_b,walls,floors`` file; unlisted pairs have none."""
    out = {}
    with open(path, newline="") as fh:
        rows = iter(_data_rows(fh))
        next(rows, None)
        for lineno, row in rows:
            try:
                a, b, walls, floors = row[:4]
                out[(a, b)] = (int(walls), int(floors))
            except ValueError:
                raise BadValue("expected node_a,node_b,walls,floors", lineno,
                               path=str(path)) from None
    return out


_BOOL = {"true": True, "1": True, "yes": True, "on": True,
         "false": False, "0": False, "no": False, "off": False}


def parse_system(path: str | os.PathLike, base: PhyMacParams | None = None) -> PhyMacParams:
    """``key,value`` overrides for :class:`PhyMacParams`."""
    base = base or PhyMacParams()
    kinds = {f.name: f.type for f in fields(PhyMacParams)}
    overrides = {}
    with open(path, newline="") as fh:
        for lineno, row in _data_rows(fh):
            key, raw = row[0], row[1] if len(row) > 1 else ""
            if key == "key":
                continue
            if key not in kinds:
                raise BadValue(f"unknown parameter {key!r}", lineno, "key", path=str(path))
            overrides[key] = _coerce(key, kinds[key], raw, lineno, str(path))
    return base.with_overrides(**overrides)


def _coerce(key: str, kind: str, raw: str, line: int, path: str):
    try:
        if key == "sensitivity_dbm":
            return tuple(float(v) for v in raw.split(";"))
        if raw.lower() in ("", "none", "auto") and "None" in kind:
            return None
        if kind.startswith("bool"):
            return _BOOL[raw.lower()]
        if kind.startswith("int"):
            return int(raw)
        return float(raw)
    except (ValueError, KeyError):
        raise BadValue(f"bad value {raw!r} for {key}", line, "value", path=path) from None


def write_system(params: PhyMacParams, path: str | os.PathLike) -> None:
    """Write the parameters that differ from the defaults as ``key,value`` rows."""
    base = PhyMacParams()
    with open(path, "w", newline="") as fh:
        fh.write("key,value\n")
        for f in fields(PhyMacParams):
            v = getattr(params, f.name)
            if v == getattr(base, f.name):
                continue
            if isinstance(v, tuple):
                v = ";".join(repr(x) for x in v)
            elif v is None:
                v = "none"
            elif isinstance(v, float):
                v = repr(v)
            fh.write(f"{f.name},{v}\n")


def write_scenario(cfg: ScenarioConfig, path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(SCENARIO_HEADER + "\n")
        w = csv.writer(fh, lineterminator="\n")
        for n in cfg.nodes:
            w.writerow([n.node_code, n.node_type, n.wlan_code, repr(n.x), repr(n.y),
                        repr(n.z), n.primary_channel, n.min_channel, n.max_channel,
                        repr(n.tx_power_dbm), repr(n.cca_dbm), n.traffic_model.value,
                        repr(n.traffic_load), n.dcb_policy.value])


@dataclass
class WlanAccumulator:
    acked_bits: int = 0
    delivered_mpdus: int = 0
    delay_sum: int = 0  # ticks
    attempts: int = 0
    failed_attempts: int = 0
    tx_airtime: int = 0  # ticks any node of the WLAN spends transmitting
    per_sta_bits: dict[str, int] = field(default_factory=dict)


@dataclass
class WlanStats:
    wlan_code: str
    throughput: float  # bits/s
    mean_delay: float  # s
    collision_prob: float
    occupancy: float
    no_attempts: bool = False
    per_sta_throughput: dict[str, float] = field(default_factory=dict)
    attempts: int = 0


@dataclass
class StatsReport:
    wlans: list[WlanStats]
    sim_time: float
    events_dispatched: int = 0
    wall_clock: float = 0.0
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def by_code(self) -> dict[str, WlanStats]:
        return {w.wlan_code: w for w in self.wlans}


def finalize_stats(accumulators: dict[str, WlanAccumulator], sim_time: float) -> StatsReport:
    if not sim_time > 0:
        raise ValueError("sim_time must be positive")
    ticks = sim_time * 1e9
    out = []
    for code, acc in accumulators.items():
        no_attempts = acc.attempts == 0
        out.append(WlanStats(
            wlan_code=code,
            throughput=acc.acked_bits / sim_time,
            mean_delay=(acc.delay_sum / acc.delivered_mpdus / 1e9
                        if acc.delivered_mpdus else 0.0),
            collision_prob=0.0 if no_attempts else acc.failed_attempts / acc.attempts,
            occupancy=min(1.0, acc.tx_airtime / ticks),
            no_attempts=no_attempts,
            per_sta_throughput={k: v / sim_time for k, v in acc.per_sta_bits.items()},
            attempts=acc.attempts,
        ))
    return StatsReport(out, sim_time)


def format_stats(report: StatsReport) -> str:
    lines = [STATS_HEADER]
    for w in report.wlans:
        lines.append(f"{w.wlan_code},{w.throughput / 1e6:.6f},{w.mean_delay * 1e3:.6f},"
                     f"{w.collision_prob:.6f},{w.occupancy:.6f}")
    return "\n".join(lines) + "\n"


def check_writable(out_dir: str | os.PathLike) -> Path:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") from exc
    return out


def write_outputs(report: StatsReport, out_dir: str | os.PathLike,
                  trace: Sequence[str] | None = None,
                  node_logs: dict[str, list[str]] | None = None) -> list[Path]:
    """Write ``stats.csv`` plus the trace and per-node logs when given."""
    out = check_writable(out_dir)
    written = [out / "stats.csv"]
    written[0].write_text(format_stats(report))
    if trace is not None:
        p = out / "trace.csv"
        p.write_text("time_us,kind,node,detail\n" + "".join(l + "\n" for l in trace))
        written.append(p)
    if node_logs is not None:
        log_dir = out / "logs"
        log_dir.mkdir(exist_ok=True)
        for code, lines in node_logs.items():
            p = log_dir / f"node_{code}.log"
            p.write_text("".join(l + "\n" for l in lines))
            written.append(p)
    return written

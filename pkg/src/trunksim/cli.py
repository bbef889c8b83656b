"""Command-line front end: run built-in or file-defined scenarios and write reports.

Config documents are INI files::

    [scenario]
    name = mine
    duration = 60
    bottleneck = core

    [link.core]
    src = router
    dst = server
    bandwidth = 1250000
    propagation = 0.005
    capacity = 130

    [site.siteA]
    node = siteA
    dst = server
    ftp = 30

    [trunk.siteA]
    rtt_up = 0.1
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from pathlib import Path

from .netmodel import ConfigError, InvariantError
from .scenarios.builders import BUILTINS, builtin
from .scenarios.config import LinkSpec, ScenarioConfig, SiteSpec
from .scenarios.metrics import MetricsReport, aggregate
from .scenarios.runner import run_scenario as _run_one
from .trunk.policy import TrunkConfig

EXIT_OK, EXIT_INVALID, EXIT_INTERNAL = 0, 1, 2

_SCENARIO_KEYS = {
    "name": str, "duration": float, "warmup": float, "seed": int,
    "bottleneck": str, "sample_interval": float, "halvings": "floats",
    "ack_jitter": float,
}
_LINK_KEYS = {"src": str, "dst": str, "bandwidth": float, "propagation": float, "capacity": int}
_SITE_KEYS = {
    "node": str, "dst": str, "ftp": int, "web": int, "probes": int, "page_size": int,
    "ftp_window": int, "start_jitter": float,
}
_TRUNK_KEYS = {
    "rtt_up": float, "trunk_bw": float, "pkt_size": int,
    "drop_threshold_fraction": float, "activity_window": float,
}
_REQUIRED = {"link": ("src", "dst", "bandwidth", "propagation", "capacity"),
             "site": ("node", "dst")}


def _convert(where: str, raw: str, kind):
    raw = raw.strip()
    try:
        if kind == "floats":
            return tuple(float(v) for v in raw.replace(",", " ").split())
        if kind is str:
            if not raw:
                raise ValueError("empty value")
            return raw
        if kind is int:
            return int(raw)
        return float(raw)
    except ValueError as e:
        raise ConfigError(f"{where}: bad value {raw!r} ({e})") from None


def _section(where: str, items, schema: dict, required=()) -> dict:
    out = {}
    for key, raw in items:
        if key not in schema:
            raise ConfigError(f"{where}.{key}: unknown key")
        out[key] = _convert(f"{where}.{key}", raw, schema[key])
    for key in required:
        if key not in out:
            raise ConfigError(f"{where}.{key}: missing")
    return out


def parse_document(text: str) -> ScenarioConfig:
    parser = configparser.ConfigParser(interpolation=None, default_section="\x00",
                                       inline_comment_prefixes=(";",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"config syntax: {e}") from None
    scenario: dict = {}
    links, sites, trunks = [], [], {}
    for name in parser.sections():
        items = parser.items(name)
        kind, _, ident = name.partition(".")
        if name == "scenario":
            scenario = _section("scenario", items, _SCENARIO_KEYS)
        elif kind in ("link", "site", "trunk") and ident:
            where = name
            if kind == "link":
                links.append(LinkSpec(ident, **_section(where, items, _LINK_KEYS,
                                                        _REQUIRED["link"])))
            elif kind == "site":
                sites.append(SiteSpec(ident, **_section(where, items, _SITE_KEYS,
                                                        _REQUIRED["site"])))
            else:
                try:
                    trunks[ident] = TrunkConfig(**_section(where, items, _TRUNK_KEYS))
                except ConfigError as e:
                    raise ConfigError(f"{where}: {e}") from None
        else:
            raise ConfigError(f"{name}: unknown section")
    if not links:
        raise ConfigError("link: at least one [link.NAME] section is required")
    scenario.setdefault("name", "custom")
    return ScenarioConfig(links=tuple(links), sites=tuple(sites), trunks=trunks, **scenario)


def parse_config(source: str | os.PathLike) -> ScenarioConfig:
    """A builtin name, a path to an INI document, or the document text itself."""
    s = os.fspath(source)
    if s in BUILTINS:
        return builtin(s)
    if "\n" not in s and "[" not in s:
        path = Path(s)
        if not path.is_file():
            raise ConfigError(f"{s!r} is neither a builtin ({', '.join(BUILTINS)}) nor a file")
        s = path.read_text()
    return parse_document(s)


def serialize_config(cfg: ScenarioConfig) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp["scenario"] = {
        "name": cfg.name, "duration": repr(cfg.duration), "warmup": repr(cfg.warmup),
        "seed": str(cfg.seed), "sample_interval": repr(cfg.sample_interval),
        "ack_jitter": repr(cfg.ack_jitter),
    }
    if cfg.bottleneck is not None:
        cp["scenario"]["bottleneck"] = cfg.bottleneck
    if cfg.halvings:
        cp["scenario"]["halvings"] = ", ".join(repr(float(t)) for t in cfg.halvings)
    for spec, prefix in [(l, "link") for l in cfg.links] + [(s, "site") for s in cfg.sites]:
        sec = {}
        for f in fields(spec):
            v = getattr(spec, f.name)
            if f.name == "name" or v is None:
                continue
            sec[f.name] = repr(v) if isinstance(v, float) else str(v)
        cp[f"{prefix}.{spec.name}"] = sec
    for site, tc in cfg.trunks.items():
        cp[f"trunk.{site}"] = {f.name: repr(getattr(tc, f.name)) if isinstance(
            getattr(tc, f.name), float) else str(getattr(tc, f.name)) for f in fields(tc)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def parse_seeds(seed: int | None, seeds: str | None) -> list[int]:
    if seeds:
        lo, sep, hi = seeds.partition("..")
        try:
            a, b = int(lo), int(hi if sep else lo)
        except ValueError:
            raise ConfigError(f"--seeds: expected N..M, got {seeds!r}") from None
        if b < a:
            raise ConfigError(f"--seeds: empty range {seeds!r}")
        return list(range(a, b + 1))
    return [seed if seed is not None else 1]


def run_scenario(cfg: ScenarioConfig, seed: int | list[int] | range = None,
                 jobs: int = 1):
    """One report for one seed; for several seeds ``(reports, aggregate_rows)``."""
    if seed is None or isinstance(seed, int):
        return _run_one(cfg, seed)
    seeds = list(seed)
    if jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(jobs) as ex:
            reports = list(ex.map(_run_one, [cfg] * len(seeds), seeds))
    else:
        reports = [_run_one(cfg, s) for s in seeds]
    return reports, aggregate(reports)


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def report_csv(report: MetricsReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("metric", "entity", "value", "unit"))
    for m, e, v, u in report.rows():
        w.writerow((m, e, _fmt(v), u))
    return buf.getvalue()


def sweep_csv(reports: list[MetricsReport], agg) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("seed", "metric", "entity", "value", "unit"))
    for r in reports:
        for m, e, v, u in r.rows():
            w.writerow((r.seed, m, e, _fmt(v), u))
    for m, e, mean, std, u in agg:
        w.writerow(("mean", m, e, _fmt(mean), u))
        w.writerow(("std", m, e, _fmt(std), u))
    return buf.getvalue()


def _table(rows: list[tuple[str, ...]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows)


def _num(v, unit: str) -> str:
    if unit in ("pkts", "count", "transfers"):
        return str(int(v))
    if unit == "ratio":
        return f"{100 * v:.2f}%"
    if unit == "B/s":
        return f"{v / 1000:.1f} KB/s"
    if unit == "s":
        return f"{1000 * v:.0f} ms"
    return f"{v:g}"


def report_text(report: MetricsReport) -> str:
    out = [f"scenario {report.scenario}  seed {report.seed}  window {report.window:g} s"]
    rows = report.rows()
    for title, metrics in (("throughput", ("throughput",)),
                           ("drops", ("arrivals", "drops", "drop_rate")),
                           ("delay", ("delay_mean", "delay_std", "delay_max", "delay_count")),
                           ("trunks", ("link_share", "cwnd_above5", "p3_violations"))):
        sel = [r for r in rows if r[0] in metrics]
        if not sel:
            continue
        out.append("")
        out.append(f"[{title}]")
        table = [("metric", "entity", "value")]
        table += [(m, e, _num(v, u)) for m, e, v, u in sel]
        out.append(_table(table))
    return "\n".join(out) + "\n"


def sweep_text(reports: list[MetricsReport], agg) -> str:
    parts = [report_text(r) for r in reports]
    table = [("metric", "entity", "mean", "std")]
    table += [(m, e, _num(mean, u), _num(std, u)) for m, e, mean, std, u in agg
              if m != "ledger"]
    parts.append(f"[aggregate over {len(reports)} seeds]\n" + _table(table) + "\n")
    return "\n".join(parts)


def emit_report(report, fmt: str = "csv", out=None) -> int:
    """Write ``report`` (or a ``(reports, aggregate)`` sweep) and return bytes written."""
    if isinstance(report, tuple):
        text = sweep_csv(*report) if fmt == "csv" else sweep_text(*report)
    else:
        text = report_csv(report) if fmt == "csv" else report_text(report)
    data = text.encode()
    if out is None or out == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        Path(out).write_bytes(data)
    return len(data)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="trunksim", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a builtin scenario or a config file")
    run.add_argument("scenario", help="builtin name or path to an INI config")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--seeds", default=None, metavar="N..M", help="seed sweep (inclusive)")
    run.add_argument("--out", default="-", help="output path (default: stdout)")
    run.add_argument("--format", choices=("csv", "text"), default="csv")
    run.add_argument("--jobs", type=int, default=1, help="parallel seeds")
    sub.add_parser("list", help="list builtin scenarios")
    show = sub.add_parser("show", help="print a scenario as an INI document")
    show.add_argument("scenario")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for name in BUILTINS:
            print(name)
        return EXIT_OK
    try:
        cfg = parse_config(args.scenario)
        if args.command == "show":
            sys.stdout.write(serialize_config(cfg))
            return EXIT_OK
        seeds = parse_seeds(args.seed, args.seeds)
        if args.seeds:
            result = run_scenario(cfg, seeds, jobs=args.jobs)
        else:
            result = run_scenario(cfg, seeds[0])
        emit_report(result, args.format, args.out)
    except ConfigError as e:
        print(f"trunksim: invalid configuration: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"trunksim: {e}", file=sys.stderr)
        return EXIT_INVALID
    except InvariantError as e:
        print(f"trunksim: internal invariant violated: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

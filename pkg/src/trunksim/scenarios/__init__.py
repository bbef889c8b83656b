"""Scenario builders, traffic sources, the run harness and its metrics."""

from .builders import (BUILTINS, build_buffer_sizing, build_eight_sites, build_trunk_fairness,
                       build_web_vs_ftp, builtin, eight_site_loads)
from .config import LinkSpec, ScenarioConfig, SiteSpec
from .metrics import (DelayStats, MetricsReport, QueueStats, TrunkStats, aggregate,
                      summarize_delays)
from .runner import Simulation, collect_metrics, run_scenario
from .sources import GreedyFtp, WebSession, web_session_source

__all__ = [
    "BUILTINS", "DelayStats", "GreedyFtp", "LinkSpec", "MetricsReport", "QueueStats",
    "ScenarioConfig", "Simulation", "SiteSpec", "TrunkStats", "WebSession", "aggregate",
    "build_buffer_sizing", "build_eight_sites", "build_trunk_fairness", "build_web_vs_ftp",
    "builtin", "collect_metrics", "eight_site_loads", "run_scenario", "summarize_delays",
    "web_session_source",
]

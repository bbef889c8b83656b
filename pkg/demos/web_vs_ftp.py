"""Web sessions competing with greedy bulk transfers, with and without trunks.

Ten closed-loop web sessions share a 1100 KB/s port with, in turn, nothing,
40 greedy ftp flows, and the same 40 flows with every site behind a trunk.

Run: python demos/web_vs_ftp.py [seed]
"""

import sys

from trunksim.scenarios import build_web_vs_ftp, run_scenario

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1
labels = {"a": "web alone", "b": "web + 40 ftp", "c": "web + 40 ftp, trunked"}

print(f"{'case':24s} {'web KB/s':>9s} {'mean ms':>8s} {'std ms':>8s} {'port drops':>11s}")
for v, label in labels.items():
    rep = run_scenario(build_web_vs_ftp(v), seed)
    d = rep.delays["siteW_web"]
    print(f"{label:24s} {rep.throughput['siteW_web'] / 1e3:9.1f} {d.mean * 1e3:8.0f} "
          f"{d.std * 1e3:8.0f} {rep.drop_rate('link:bottleneck'):11.2%}")

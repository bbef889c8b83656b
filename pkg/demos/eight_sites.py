"""Eight sites merge onto one server port; trunking moves loss to the edges.

Without trunks every site sees the same probe delay and the core port
drops heavily. With one trunk per site the port is nearly loss-free and
each site's probe delay tracks its own load: lightly loaded B is fastest.
One probe per site makes a single seed noisy; the acceptance suite pools
many seeds.

Run: python demos/eight_sites.py [seed]   (about 5 s)
"""

import sys

from trunksim.scenarios import build_eight_sites, run_scenario

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1

for trunking in (False, True):
    rep = run_scenario(build_eight_sites(trunking), seed)
    print(f"\ntrunking {'on' if trunking else 'off'}: port drop rate "
          f"{rep.drop_rate('link:bottleneck'):.2%}")
    for site in ("siteA", "siteB", "siteC"):
        d = rep.delays.get(f"{site}_probe")
        probe = f"{d.mean:.2f} s over {d.count} pages" if d else "no completed pages"
        edge = (f", trunk drops {rep.drop_rate(f'trunk:{site}'):.1%}"
                if f"trunk:{site}" in rep.queues else "")
        print(f"  {site}: probe {probe}{edge}")

"""How a trunk transmitter sizes its buffer and decides what to drop.

Run: python demos/policy_tour.py
"""

from trunksim.trunk.policy import (TrunkConfig, drop_probability, drop_threshold,
                                   exemption_threshold, trunk_buffer_capacity)

cfg = TrunkConfig(rtt_up=0.1, trunk_bw=1_250_000)
cap = trunk_buffer_capacity(cfg)
thr = drop_threshold(cfg, cap)
print(f"10 Mbps trunk, 100 ms RTT bound: buffer {cap} packets, drops start above {thr}")

print("\noccupancy  drop probability")
for occ in range(thr - 2, cap + 1, 7):
    print(f"{occ:9d}  {drop_probability(occ, thr, cap):.3f}")

# after a managed drop a flow is left alone until it has forwarded K packets,
# enough for it to get through fast retransmit and recovery
print("\nflow window  X (recovery packets)  K (exempt span)")
for w in (2, 4, 8, 10, 16, 32):
    x, k = exemption_threshold(w)
    print(f"{w:11d}  {x:20d}  {k:15d}")

"""Independent reference computations for the unit tests.

Each function restates a rule with exact rational arithmetic, sharing no
code with the package. ``FROZEN`` holds values produced by these references
once and pasted in; the tests compare the package against the literals, so
a later change to either side shows up as a mismatch.
"""

from fractions import Fraction
import math


def ref_exemption(w):
    x = math.floor(Fraction(3 * w * w, 8))
    return x, math.floor(Fraction(x, 2))


def ref_capacity(rtt_up, bw, pkt):
    return max(1, math.ceil(Fraction(str(rtt_up)) * Fraction(str(bw)) / pkt))


def ref_drop_probability(occ, thr, cap):
    if occ >= cap:
        return Fraction(1)
    if occ <= thr:
        return Fraction(0)
    return Fraction(occ - thr, cap - thr)


def ref_service_time(size, bw):
    return Fraction(size) / Fraction(str(bw))


def ref_slow_start(mss, ssthresh, acks):
    """cwnd after each of ``acks`` new ACKs, starting from one segment."""
    cwnd = Fraction(mss)
    out = []
    for _ in range(acks):
        if cwnd < ssthresh:
            cwnd += mss
        else:
            cwnd += Fraction(mss * mss) / cwnd
        out.append(cwnd)
    return out


def ref_rto_trace(samples, rto_min=0.2):
    srtt = rttvar = None
    out = []
    for s in samples:
        s = Fraction(str(s))
        if srtt is None:
            srtt, rttvar = s, s / 2
        else:
            rttvar = Fraction(3, 4) * rttvar + Fraction(1, 4) * abs(srtt - s)
            srtt = Fraction(7, 8) * srtt + Fraction(1, 8) * s
        out.append(max(Fraction(str(rto_min)), srtt + 4 * rttvar))
    return out


def ref_frame(payload):
    n = len(payload)
    return bytes([n // 256, n % 256]) + payload


FROZEN = {
    # w -> (X, K)
    "exemption": {0: (0, 0), 1: (0, 0), 2: (1, 0), 3: (3, 1), 4: (6, 3), 5: (9, 4),
                  6: (13, 6), 7: (18, 9), 8: (24, 12), 10: (37, 18), 16: (96, 48),
                  20: (150, 75), 33: (408, 204)},
    # (rtt_up, trunk_bw, pkt) -> packets
    "capacity": {(0.1, 1_100_000, 1500): 74, (0.0, 1_100_000, 1500): 1,
                 (0.2, 1_100_000, 1500): 147, (0.1, 1_250_000, 1500): 84,
                 (0.3, 1_000_000, 1500): 200, (0.05, 1_250_000, 1500): 42},
    # (size, bandwidth) -> seconds as (numerator, denominator)
    "service": {(1500, 1_100_000): (3, 2200), (0, 1_100_000): (0, 1),
                (1500, 1_250_000): (3, 2500), (1540, 2_200_000): (7, 10000)},
    # cwnd in mss units after 1..6 ACKs with ssthresh = 4 mss
    "slow_start_mss": [2, 3, 4, Fraction(17, 4), Fraction(305, 68), Fraction(97649, 20740)],
    # rto after samples 0.1, 0.1, 0.3, 0.1
    "rto": [Fraction(3, 10), Fraction(1, 4), Fraction(7, 16), Fraction(61, 160)],
}

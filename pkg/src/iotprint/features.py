"""Per-packet feature vectors: 17 binary header flags + 3 payload values.

The flag order below is frozen; fingerprints concatenate these vectors,
so the order is part of the on-disk data contract (FEATURE_SCHEMA).
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyInput
from .packet_model import AppProtocol, IpOption, Network, ParsedPacket, Transport

FEATURE_SCHEMA = "packet-features/1"

HEADER_FLAG_NAMES = (
    "arp",
    "ip",
    "icmp",
    "icmpv6",
    "eapol",
    "tcp",
    "udp",
    "http",
    "https",
    "dhcp",
    "bootp",
    "ssdp",
    "dns",
    "mdns",
    "ntp",
    "ip_padding",
    "ip_router_alert",
)
FEATURE_NAMES = HEADER_FLAG_NAMES + ("entropy", "tcp_payload_length", "tcp_window_size")

HEADER_FLAG_COUNT = len(HEADER_FLAG_NAMES)  # 17
PACKET_FEATURE_COUNT = len(FEATURE_NAMES)  # 20
ENTROPY_INDEX = FEATURE_NAMES.index("entropy")
PAYLOAD_FEATURE_INDICES = (17, 18, 19)

_APP_FLAGS = (
    AppProtocol.HTTP,
    AppProtocol.HTTPS,
    AppProtocol.DHCP,
    AppProtocol.BOOTP,
    AppProtocol.SSDP,
    AppProtocol.DNS,
    AppProtocol.MDNS,
    AppProtocol.NTP,
)


@dataclass(frozen=True)
class PacketFeatures:
    """The 20-value feature vector for one packet."""

    header_flags: tuple
    entropy: float
    tcp_payload_length: int
    tcp_window_size: int

    def __post_init__(self) -> None:
        if len(self.header_flags) != HEADER_FLAG_COUNT:
            raise ValueError(f"need {HEADER_FLAG_COUNT} header flags")
        if any(flag not in (0, 1) for flag in self.header_flags):
            raise ValueError("header flags must be 0 or 1")
        if not 0.0 <= self.entropy <= 1.0:
            raise ValueError("entropy outside [0, 1]")
        if self.tcp_payload_length < 0 or self.tcp_window_size < 0:
            raise ValueError("lengths must be non-negative")

    def as_vector(self) -> tuple:
        return tuple(float(f) for f in self.header_flags) + (
            float(self.entropy),
            float(self.tcp_payload_length),
            float(self.tcp_window_size),
        )


def shannon_entropy(payload: bytes) -> float:
    """Byte-value Shannon entropy normalized to [0, 1].

    Computes -sum(p_i * log_256(p_i)) over the 256 byte values with
    p_i = count(i) / len(payload); zero-count terms contribute nothing.
    Evaluated via counts in log2 so that the constant-payload (0.0) and
    uniform-256 (1.0) cases come out exact. Empty payload returns 0.
    """
    m = len(payload)
    if m == 0:
        return 0.0
    counts = np.bincount(np.frombuffer(payload, dtype=np.uint8), minlength=256)
    nonzero = counts[counts > 0].astype(np.float64)
    bits = float(np.log2(float(m))) - float((nonzero * np.log2(nonzero)).sum()) / m
    return bits / 8.0


def extract_features(pkt: ParsedPacket) -> PacketFeatures:
    """Map one parsed packet to its feature vector.

    The IP flag covers IPv4 and IPv6; the TCP payload length and window
    size are 0 for non-TCP packets so vectors stay fixed-width.
    """
    is_tcp = pkt.transport is Transport.TCP
    flags = (
        int(pkt.network is Network.ARP),
        int(pkt.network in (Network.IPV4, Network.IPV6)),
        int(pkt.transport is Transport.ICMP),
        int(pkt.transport is Transport.ICMPV6),
        int(pkt.network is Network.EAPOL),
        int(is_tcp),
        int(pkt.transport is Transport.UDP),
        *(int(app in pkt.app_protocols) for app in _APP_FLAGS),
        int(IpOption.PADDING in pkt.ip_options),
        int(IpOption.ROUTER_ALERT in pkt.ip_options),
    )
    return PacketFeatures(
        header_flags=flags,
        entropy=shannon_entropy(pkt.payload),
        tcp_payload_length=len(pkt.payload) if is_tcp else 0,
        tcp_window_size=pkt.tcp_window_size if is_tcp else 0,
    )


def ecdf(values: Sequence[float]) -> list:
    """Empirical CDF as sorted (value, P(X <= value)) pairs."""
    if len(values) == 0:
        raise EmptyInput("ecdf needs at least one value")
    arr = np.asarray(values, dtype=np.float64)
    distinct, counts = np.unique(arr, return_counts=True)
    probs = np.cumsum(counts) / arr.size
    return list(zip(distinct.tolist(), probs.tolist()))


def render_features_csv(features: Sequence[PacketFeatures]) -> str:
    """CSV with a schema header line, one row per packet, repr-precision floats."""
    out = io.StringIO()
    out.write(f"# schema: {FEATURE_SCHEMA}\n")
    out.write(",".join(FEATURE_NAMES) + "\n")
    for feat in features:
        vec = feat.as_vector()
        fields = [str(int(v)) for v in vec[:HEADER_FLAG_COUNT]]
        fields.append(repr(vec[ENTROPY_INDEX]))
        fields.append(str(int(vec[18])))
        fields.append(str(int(vec[19])))
        out.write(",".join(fields) + "\n")
    return out.getvalue()


def write_features_csv(path, features: Sequence[PacketFeatures]) -> None:
    with open(path, "w", encoding="ascii") as handle:
        handle.write(render_features_csv(features))

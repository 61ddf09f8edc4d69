"""Fingerprints, behavioral profiles, and session statistics.

A fingerprint is the concatenation of 5 consecutive packets' feature
vectors (100 values, packet order preserved). A behavioral profile is
the labeled set of all fingerprints observed for one device.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import FrameTooShort, InsufficientTraffic, TruncatedHeader
from .features import FEATURE_SCHEMA, PACKET_FEATURE_COUNT, PacketFeatures, extract_features
from .packet_model import ParsedPacket, Transport, parse_frame
from .pcap_io import DeviceSelector, filter_device, read_capture

FINGERPRINT_PACKETS = 5
FINGERPRINT_DIM = FINGERPRINT_PACKETS * PACKET_FEATURE_COUNT  # 100
PROFILE_SCHEMA = "behavioral-profile/1"


@dataclass(frozen=True)
class Fingerprint:
    """One 100-value classification unit built from 5 consecutive packets."""

    values: tuple
    label: str

    def __post_init__(self) -> None:
        if len(self.values) != FINGERPRINT_DIM:
            raise ValueError(f"fingerprint must have {FINGERPRINT_DIM} values")


@dataclass(frozen=True)
class ProfileSource:
    """Provenance of a profile: inputs plus the feature layout version."""

    captures: tuple
    feature_schema: str = FEATURE_SCHEMA
    skipped_frames: int = 0


@dataclass(frozen=True)
class BehavioralProfile:
    device_label: str
    category_label: str
    fingerprints: tuple
    source: ProfileSource


@dataclass(frozen=True)
class SessionStats:
    """Packet counts grouped by unordered (src_port, dst_port) pair."""

    per_session: dict
    total_session_packets: int
    session_count: int
    avg_packets_per_session: float


def build_fingerprints(features: Sequence[PacketFeatures], label: str) -> list:
    """Group packets into consecutive fives; the trailing remainder is dropped."""
    out = []
    for start in range(0, len(features) - FINGERPRINT_PACKETS + 1, FINGERPRINT_PACKETS):
        window = features[start : start + FINGERPRINT_PACKETS]
        values: tuple = ()
        for feat in window:
            values += feat.as_vector()
        out.append(Fingerprint(values=values, label=label))
    return out


def session_stats(packets: Sequence[ParsedPacket]) -> SessionStats:
    """Count packets per port-pair session; packets without ports are skipped."""
    per_session: dict = {}
    for pkt in packets:
        if pkt.transport not in (Transport.TCP, Transport.UDP):
            continue
        key = (min(pkt.src_port, pkt.dst_port), max(pkt.src_port, pkt.dst_port))
        per_session[key] = per_session.get(key, 0) + 1
    total = sum(per_session.values())
    count = len(per_session)
    avg = total / count if count else 0.0
    return SessionStats(per_session, total, count, avg)


def format_session_average(avg: float) -> str:
    """Two-decimal display, truncated rather than rounded (8.7976 -> 8.79)."""
    return f"{math.floor(avg * 100) / 100:.2f}"


def packets_from_capture(path: str | Path) -> tuple:
    """Read and parse a capture, skipping undecodable frames.

    Returns (packets, skipped_count).
    """
    _, frames = read_capture(path)
    packets = []
    skipped = 0
    for frame in frames:
        try:
            packets.append(parse_frame(frame))
        except (FrameTooShort, TruncatedHeader):
            skipped += 1
    return packets, skipped


def build_profile(
    capture: str | Path,
    sel: DeviceSelector,
    device_label: str,
    category_label: str,
) -> BehavioralProfile:
    """Full pipeline: read, parse, filter, extract, group into fingerprints."""
    packets, skipped = packets_from_capture(capture)
    matching = filter_device(packets, sel)
    if len(matching) < FINGERPRINT_PACKETS:
        raise InsufficientTraffic(
            f"{len(matching)} matching packets; need at least {FINGERPRINT_PACKETS}"
        )
    feats = [extract_features(pkt) for pkt in matching]
    prints = build_fingerprints(feats, device_label)
    source = ProfileSource(captures=(Path(capture).name,), skipped_frames=skipped)
    return BehavioralProfile(device_label, category_label, tuple(prints), source)


def profile_from_packets(
    packets: Sequence[ParsedPacket],
    device_label: str,
    category_label: str,
    capture_name: str = "<memory>",
) -> BehavioralProfile:
    """Profile from already-parsed packets (testing and corpus assembly)."""
    if len(packets) < FINGERPRINT_PACKETS:
        raise InsufficientTraffic(
            f"{len(packets)} packets; need at least {FINGERPRINT_PACKETS}"
        )
    feats = [extract_features(pkt) for pkt in packets]
    prints = build_fingerprints(feats, device_label)
    return BehavioralProfile(
        device_label, category_label, tuple(prints), ProfileSource(captures=(capture_name,))
    )


def save_profile(profile: BehavioralProfile, path: str | Path) -> None:
    doc = {
        "schema": PROFILE_SCHEMA,
        "device_label": profile.device_label,
        "category_label": profile.category_label,
        "source": {
            "captures": list(profile.source.captures),
            "feature_schema": profile.source.feature_schema,
            "skipped_frames": profile.source.skipped_frames,
        },
        "fingerprints": [list(fp.values) for fp in profile.fingerprints],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="ascii")


def load_profile(path: str | Path) -> BehavioralProfile:
    doc = json.loads(Path(path).read_text(encoding="ascii"))
    if doc.get("schema") != PROFILE_SCHEMA:
        raise ValueError(f"unsupported profile schema: {doc.get('schema')!r}")
    label = doc["device_label"]
    prints = []
    for row in doc["fingerprints"]:
        if len(row) != FINGERPRINT_DIM:
            raise ValueError(f"fingerprint of {len(row)} values; expected {FINGERPRINT_DIM}")
        prints.append(Fingerprint(values=tuple(float(v) for v in row), label=label))
    source = ProfileSource(
        captures=tuple(doc["source"]["captures"]),
        feature_schema=doc["source"]["feature_schema"],
        skipped_frames=doc["source"]["skipped_frames"],
    )
    return BehavioralProfile(label, doc["category_label"], tuple(prints), source)

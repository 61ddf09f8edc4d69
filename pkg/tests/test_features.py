import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iotprint.errors import EmptyInput
from iotprint.features import (
    FEATURE_NAMES,
    HEADER_FLAG_COUNT,
    PACKET_FEATURE_COUNT,
    PacketFeatures,
    ecdf,
    extract_features,
    render_features_csv,
    shannon_entropy,
)
from iotprint.packet_model import AppProtocol, Network, ParsedPacket, Transport, parse_frame
from iotprint.synth import ARCHETYPES, generate_trace


def tally_entropy_oracle(payload):
    """Direct frequency tally with the natural-log / ln(256) formula."""
    if not payload:
        return 0.0
    counts = {}
    for byte in payload:
        counts[byte] = counts.get(byte, 0) + 1
    m = len(payload)
    total = 0.0
    for c in counts.values():
        p = c / m
        total -= p * (math.log(p) / math.log(256))
    return total


def test_entropy_exact_values():
    assert shannon_entropy(b"\x41" * 64) == 0.0
    assert shannon_entropy(bytes(range(256))) == 1.0
    assert shannon_entropy(b"\x00\xff") == 0.125
    assert shannon_entropy(b"") == 0.0


def test_entropy_matches_tally_oracle():
    rng = np.random.default_rng(42)
    for _ in range(200):
        payload = bytes(rng.integers(0, 256, size=int(rng.integers(0, 801)), dtype=np.uint8))
        assert abs(shannon_entropy(payload) - tally_entropy_oracle(payload)) <= 1e-12


@given(data=st.binary(max_size=400), seed=st.integers(0, 2**31))
def test_entropy_permutation_invariant(data, seed):
    shuffled = bytes(
        np.random.default_rng(seed).permutation(np.frombuffer(data, dtype=np.uint8).copy())
    )
    assert shannon_entropy(shuffled) == shannon_entropy(data)


@settings(deadline=None)
@given(data=st.binary(min_size=1, max_size=300))
def test_entropy_doubling_invariant(data):
    assert shannon_entropy(data + data) == pytest.approx(shannon_entropy(data), abs=1e-12)


def _packet(**overrides):
    base = dict(
        ts_sec=0,
        ts_usec=0,
        src_mac=b"\x02" + b"\x00" * 5,
        dst_mac=b"\x04" + b"\x00" * 5,
        ether_type=0x0800,
        network=Network.IPV4,
        transport=Transport.NONE,
        payload=b"",
    )
    base.update(overrides)
    return ParsedPacket(**base)


def test_extract_eapol_only_flag():
    pkt = _packet(ether_type=0x888E, network=Network.EAPOL, payload=b"\x01\x02\x03\x04")
    feat = extract_features(pkt)
    assert feat.header_flags == (0, 0, 0, 0, 1) + (0,) * 12
    assert feat.entropy == shannon_entropy(b"\x01\x02\x03\x04")
    assert feat.tcp_payload_length == 0 and feat.tcp_window_size == 0


def test_extract_tcp_http_packet():
    pkt = _packet(
        transport=Transport.TCP,
        src_port=50000,
        dst_port=80,
        tcp_window_size=8192,
        app_protocols=frozenset({AppProtocol.HTTP}),
        payload=b"z" * 100,
    )
    feat = extract_features(pkt)
    names_on = {FEATURE_NAMES[i] for i, v in enumerate(feat.header_flags) if v}
    assert names_on == {"ip", "tcp", "http"}
    assert feat.tcp_payload_length == 100
    assert feat.tcp_window_size == 8192


def test_extract_udp_mdns_zeroes_tcp_fields():
    pkt = _packet(
        transport=Transport.UDP,
        src_port=5353,
        dst_port=5353,
        app_protocols=frozenset({AppProtocol.MDNS}),
        payload=b"m" * 40,
    )
    feat = extract_features(pkt)
    names_on = {FEATURE_NAMES[i] for i, v in enumerate(feat.header_flags) if v}
    assert names_on == {"ip", "udp", "mdns"}
    assert feat.tcp_payload_length == 0 and feat.tcp_window_size == 0


def test_flag_exclusivity_on_generated_traffic():
    idx = {name: i for i, name in enumerate(FEATURE_NAMES)}
    for arch in (ARCHETYPES["hub-conduit"], ARCHETYPES["outlet"]):
        frames, _ = generate_trace(arch, 300, seed=5)
        for frame in frames:
            flags = extract_features(parse_frame(frame)).header_flags
            assert flags[idx["tcp"]] + flags[idx["udp"]] <= 1
            assert flags[idx["arp"]] + flags[idx["eapol"]] + flags[idx["ip"]] <= 1


def test_vector_layout():
    pkt = _packet(transport=Transport.TCP, src_port=1, dst_port=2, tcp_window_size=7, payload=b"ab")
    vec = extract_features(pkt).as_vector()
    assert len(vec) == PACKET_FEATURE_COUNT
    assert vec[HEADER_FLAG_COUNT] == shannon_entropy(b"ab")
    assert vec[18] == 2.0 and vec[19] == 7.0


def test_ecdf_single_value():
    assert ecdf([5]) == [(5.0, 1.0)]


def test_ecdf_counts_duplicates():
    assert ecdf([1, 2, 2, 4]) == [(1.0, 0.25), (2.0, 0.75), (4.0, 1.0)]


def test_ecdf_uniform_close_to_identity():
    values = np.random.default_rng(3).uniform(0, 1, size=10000)
    pairs = ecdf(values)
    deviation = max(abs(p - v) for v, p in pairs)
    assert deviation < 0.05


def test_ecdf_monotone_and_bounded():
    values = np.random.default_rng(4).normal(size=500)
    pairs = ecdf(values)
    assert all(a[0] < b[0] and a[1] < b[1] for a, b in zip(pairs, pairs[1:]))
    assert all(0 < p <= 1 for _, p in pairs)
    assert pairs[-1][1] == 1.0


def test_ecdf_empty_input():
    with pytest.raises(EmptyInput):
        ecdf([])


def test_features_invariants_enforced():
    with pytest.raises(ValueError):
        PacketFeatures(header_flags=(0,) * 16, entropy=0.0, tcp_payload_length=0, tcp_window_size=0)
    with pytest.raises(ValueError):
        PacketFeatures(header_flags=(2,) + (0,) * 16, entropy=0.0, tcp_payload_length=0, tcp_window_size=0)
    with pytest.raises(ValueError):
        PacketFeatures(header_flags=(0,) * 17, entropy=1.5, tcp_payload_length=0, tcp_window_size=0)


def test_csv_rendering_round_trips_floats():
    pkt = _packet(
        transport=Transport.TCP, src_port=1, dst_port=2, tcp_window_size=3, payload=b"\x00\x01\x02"
    )
    feat = extract_features(pkt)
    text = render_features_csv([feat, feat])
    lines = text.strip().split("\n")
    assert lines[0].startswith("# schema: packet-features/")
    assert lines[1] == ",".join(FEATURE_NAMES)
    assert len(lines) == 4
    entropy_field = lines[2].split(",")[17]
    assert float(entropy_field) == feat.entropy

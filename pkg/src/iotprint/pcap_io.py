"""Classic pcap reading/writing and per-device packet filtering.

Only classic pcap (wireshark's "libpcap" format) with Ethernet link type
is supported. Layout: 24-byte global header, then per record a 16-byte
header (ts_sec, ts_frac, incl_len, orig_len) followed by incl_len frame
bytes, all in the byte order announced by the magic number.
"""

from __future__ import annotations

import ipaddress
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import BadMagic, IoFailure, TruncatedFile, UnsupportedLinkType
from .packet_model import ParsedPacket, RawFrame

LINKTYPE_ETHERNET = 1
MAX_FRAME_BYTES = 65535

_MAGIC_MICRO = 0xA1B2C3D4
_MAGIC_NANO = 0xA1B23C4D
_PCAPNG_BLOCK = 0x0A0D0D0A

# magic as read little-endian -> (byte order, timestamp resolution)
_MAGIC_TABLE = {
    0xA1B2C3D4: ("little", "micro"),
    0xD4C3B2A1: ("big", "micro"),
    0xA1B23C4D: ("little", "nano"),
    0x4D3CB2A1: ("big", "nano"),
}


@dataclass(frozen=True)
class CaptureMeta:
    """File-level facts from a read capture.

    truncated_records counts records whose header or body was cut short
    at end of file; frames before the cut are still returned.
    """

    link_type: int
    byte_order: str
    timestamp_resolution: str
    packet_count: int
    truncated_records: int = 0


@dataclass(frozen=True)
class DeviceSelector:
    """Identifies one device by MAC and/or IP; either side may match."""

    mac: bytes | None = None
    ip: str | None = None

    def __post_init__(self) -> None:
        if self.mac is None and self.ip is None:
            raise ValueError("selector needs a MAC or an IP")
        if self.mac is not None and len(self.mac) != 6:
            raise ValueError("MAC must be 6 bytes")
        if self.ip is not None:
            object.__setattr__(self, "ip", str(ipaddress.ip_address(self.ip)))

    def matches(self, pkt: ParsedPacket) -> bool:
        if self.mac is not None and self.mac in (pkt.src_mac, pkt.dst_mac):
            return True
        if self.ip is not None and self.ip in (pkt.src_ip, pkt.dst_ip):
            return True
        return False


def read_capture(path: str | Path) -> tuple[CaptureMeta, list[RawFrame]]:
    """Read a classic pcap file; timestamps normalized to microseconds.

    Nanosecond captures are truncated (not rounded) to µs. A record cut
    short by end of file stops reading and is counted in the returned
    meta rather than raising.
    """
    data = Path(path).read_bytes()
    if len(data) < 4:
        raise BadMagic("file too short to hold a pcap magic number")
    magic = int.from_bytes(data[:4], "little")
    if magic == _PCAPNG_BLOCK:  # the pcapng section header is a palindrome
        raise BadMagic("pcapng is not supported; convert to classic pcap first")
    if magic not in _MAGIC_TABLE:
        raise BadMagic(f"unrecognized magic 0x{magic:08X}")
    byte_order, resolution = _MAGIC_TABLE[magic]
    endian = "<" if byte_order == "little" else ">"
    if len(data) < 24:
        raise TruncatedFile("global header cut short")
    _, _, _, _, _, network = struct.unpack(endian + "HHiIII", data[4:24])
    if network != LINKTYPE_ETHERNET:
        raise UnsupportedLinkType(f"link type {network}; only Ethernet (1) is supported")

    frames: list[RawFrame] = []
    truncated = 0
    pos = 24
    record = struct.Struct(endian + "IIII")
    while pos < len(data):
        if pos + 16 > len(data):
            truncated = 1
            break
        ts_sec, ts_frac, incl_len, orig_len = record.unpack_from(data, pos)
        pos += 16
        if pos + incl_len > len(data):
            truncated = 1
            break
        body = data[pos : pos + incl_len]
        pos += incl_len
        ts_usec = ts_frac // 1000 if resolution == "nano" else ts_frac
        frames.append(RawFrame(ts_sec, ts_usec, max(orig_len, incl_len), body))
    meta = CaptureMeta(LINKTYPE_ETHERNET, byte_order, resolution, len(frames), truncated)
    return meta, frames


def write_capture(path: str | Path, frames: Iterable[RawFrame]) -> int:
    """Write frames as a little-endian microsecond pcap; returns the count."""
    chunks = [struct.pack("<IHHiIII", _MAGIC_MICRO, 2, 4, 0, 0, MAX_FRAME_BYTES, LINKTYPE_ETHERNET)]
    count = 0
    for frame in frames:
        if frame.capture_length > MAX_FRAME_BYTES:
            raise ValueError(f"frame of {frame.capture_length} bytes exceeds {MAX_FRAME_BYTES}")
        chunks.append(
            struct.pack(
                "<IIII", frame.ts_sec, frame.ts_usec, frame.capture_length, frame.original_length
            )
        )
        chunks.append(frame.data)
        count += 1
    try:
        Path(path).write_bytes(b"".join(chunks))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return count


def filter_device(packets: Sequence[ParsedPacket], sel: DeviceSelector) -> list[ParsedPacket]:
    """Keep packets flowing into or out of the selected device, in order."""
    return [pkt for pkt in packets if sel.matches(pkt)]

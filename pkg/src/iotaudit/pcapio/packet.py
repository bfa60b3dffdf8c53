"""Link/network/transport decoding of raw capture records into PacketRecords."""

from __future__ import annotations

import dataclasses
import enum
import ipaddress
import socket
import struct
from pathlib import Path

from .pcap import (CaptureReader, RawRecord, UnsupportedLinkType,
                   LINKTYPE_ETHERNET, LINKTYPE_LINUX_SLL, LINKTYPE_LINUX_SLL2,
                   SUPPORTED_LINK_TYPES)

ETH_IPV4 = 0x0800
ETH_IPV6 = 0x86DD
ETH_VLAN = (0x8100, 0x88A8)

TCP_FIN = 0x01
TCP_SYN = 0x02
TCP_RST = 0x04
TCP_ACK = 0x10


class Transport(enum.Enum):
    TCP = "TCP"
    UDP = "UDP"
    ICMP = "ICMP"
    OTHER = "OTHER"


class MalformedPacket(ValueError):
    pass


@dataclasses.dataclass
class PacketRecord:
    ts_sec: int
    ts_usec: int
    src_ip: str
    dst_ip: str
    src_port: int | None
    dst_port: int | None
    transport: Transport
    payload: bytes
    wire_length: int
    index: int = 0
    tcp_seq: int | None = None
    tcp_flags: int = 0
    ip_proto: int | None = None

    @property
    def ts_micros(self) -> int:
        return self.ts_sec * 1_000_000 + self.ts_usec

    @property
    def timestamp(self) -> float:
        return self.ts_sec + self.ts_usec / 1e6


@dataclasses.dataclass
class ParseResult:
    packets: list[PacketRecord]
    malformed: int          # frames that failed link/IP/transport decode
    non_ip: int             # valid frames that carry no IP packet (ARP, LLDP, ...)
    warnings: list[str]
    link_type: int
    format: str
    device_id: str = ""

    def __iter__(self):
        return iter(self.packets)

    def __len__(self) -> int:
        return len(self.packets)

    def __getitem__(self, i):
        return self.packets[i]


def _strip_link(data: bytes, link_type: int) -> tuple[int, bytes] | None:
    """Returns (ethertype, network-layer bytes), or None for non-IP frames."""
    if link_type == LINKTYPE_ETHERNET:
        if len(data) < 14:
            raise MalformedPacket("ethernet frame shorter than header")
        (etype,) = struct.unpack("!H", data[12:14])
        off = 14
        while etype in ETH_VLAN:
            if len(data) < off + 4:
                raise MalformedPacket("truncated VLAN tag")
            (etype,) = struct.unpack("!H", data[off + 2:off + 4])
            off += 4
        return (etype, data[off:]) if etype in (ETH_IPV4, ETH_IPV6) else None
    if link_type == LINKTYPE_LINUX_SLL:
        if len(data) < 16:
            raise MalformedPacket("SLL frame shorter than header")
        (etype,) = struct.unpack("!H", data[14:16])
        return (etype, data[16:]) if etype in (ETH_IPV4, ETH_IPV6) else None
    if link_type == LINKTYPE_LINUX_SLL2:
        if len(data) < 20:
            raise MalformedPacket("SLL2 frame shorter than header")
        (etype,) = struct.unpack("!H", data[0:2])
        return (etype, data[20:]) if etype in (ETH_IPV4, ETH_IPV6) else None
    raise UnsupportedLinkType(link_type)


_IPV6_EXT = {0, 43, 60}  # hop-by-hop, routing, destination options


def _decode_ip(etype: int, data: bytes) -> tuple[str, str, int, bytes, bool]:
    """Returns (src, dst, protocol, transport bytes, is_fragment_tail)."""
    if etype == ETH_IPV4:
        if len(data) < 20:
            raise MalformedPacket("IPv4 header truncated")
        ver_ihl = data[0]
        if ver_ihl >> 4 != 4:
            raise MalformedPacket(f"IPv4 version field is {ver_ihl >> 4}")
        ihl = (ver_ihl & 0x0F) * 4
        if ihl < 20 or len(data) < ihl:
            raise MalformedPacket("IPv4 IHL out of range")
        total_len = struct.unpack("!H", data[2:4])[0]
        frag = struct.unpack("!H", data[6:8])[0]
        proto = data[9]
        src = socket.inet_ntop(socket.AF_INET, data[12:16])
        dst = socket.inet_ntop(socket.AF_INET, data[16:20])
        # total_length bounds the payload so Ethernet padding never leaks in
        end = min(len(data), max(total_len, ihl))
        return src, dst, proto, data[ihl:end], (frag & 0x1FFF) != 0
    # IPv6
    if len(data) < 40:
        raise MalformedPacket("IPv6 header truncated")
    if data[0] >> 4 != 6:
        raise MalformedPacket(f"IPv6 version field is {data[0] >> 4}")
    payload_len = struct.unpack("!H", data[4:6])[0]
    nxt = data[6]
    src = socket.inet_ntop(socket.AF_INET6, data[8:24])
    dst = socket.inet_ntop(socket.AF_INET6, data[24:40])
    end = min(len(data), 40 + payload_len)
    body = data[40:end]
    frag_tail = False
    while True:
        if nxt in _IPV6_EXT:
            if len(body) < 2:
                raise MalformedPacket("IPv6 extension header truncated")
            hdr_len = (body[1] + 1) * 8
            if len(body) < hdr_len:
                raise MalformedPacket("IPv6 extension header truncated")
            nxt, body = body[0], body[hdr_len:]
        elif nxt == 44:  # fragment header
            if len(body) < 8:
                raise MalformedPacket("IPv6 fragment header truncated")
            frag_tail = (struct.unpack("!H", body[2:4])[0] & 0xFFF8) != 0
            nxt, body = body[0], body[8:]
        elif nxt == 51:  # authentication header
            if len(body) < 2:
                raise MalformedPacket("IPv6 AH truncated")
            hdr_len = (body[1] + 2) * 4
            if len(body) < hdr_len:
                raise MalformedPacket("IPv6 AH truncated")
            nxt, body = body[0], body[hdr_len:]
        else:
            return src, dst, nxt, body, frag_tail


def decode_record(rec: RawRecord) -> PacketRecord | None:
    """Decode one raw record. None for valid-but-non-IP frames.

    Raises MalformedPacket for frames that should be counted and skipped and
    UnsupportedLinkType for capture files this toolkit cannot interpret.
    """
    stripped = _strip_link(rec.data, rec.link_type)
    if stripped is None:
        return None
    etype, net = stripped
    src, dst, proto, body, frag_tail = _decode_ip(etype, net)
    base = dict(ts_sec=rec.ts_sec, ts_usec=rec.ts_usec, src_ip=src, dst_ip=dst,
                wire_length=rec.orig_len, index=rec.index, ip_proto=proto)
    if frag_tail:
        return PacketRecord(src_port=None, dst_port=None, transport=Transport.OTHER,
                            payload=body, **base)
    if proto == 6:  # TCP
        if len(body) < 20:
            raise MalformedPacket("TCP header truncated")
        sport, dport, seq = struct.unpack("!HHI", body[0:8])
        offset = (body[12] >> 4) * 4
        if offset < 20 or len(body) < offset:
            raise MalformedPacket("TCP data offset out of range")
        flags = body[13]
        return PacketRecord(src_port=sport, dst_port=dport, transport=Transport.TCP,
                            payload=body[offset:], tcp_seq=seq, tcp_flags=flags, **base)
    if proto == 17:  # UDP
        if len(body) < 8:
            raise MalformedPacket("UDP header truncated")
        sport, dport, ulen = struct.unpack("!HHH", body[0:6])
        end = min(len(body), max(ulen, 8))
        return PacketRecord(src_port=sport, dst_port=dport, transport=Transport.UDP,
                            payload=body[8:end], **base)
    if proto in (1, 58):  # ICMP, ICMPv6
        return PacketRecord(src_port=None, dst_port=None, transport=Transport.ICMP,
                            payload=body, **base)
    return PacketRecord(src_port=None, dst_port=None, transport=Transport.OTHER,
                        payload=body, **base)


def parse_capture(path: str | Path, device_id: str = "") -> ParseResult:
    """Parse a capture file into PacketRecords, in file order.

    Malformed frames are counted and skipped; an unsupported link type is a
    hard error because nothing in the file could be decoded.
    """
    reader = CaptureReader(path)
    records = reader.records()
    if reader.link_type is not None and reader.link_type not in SUPPORTED_LINK_TYPES:
        raise UnsupportedLinkType(reader.link_type)
    packets: list[PacketRecord] = []
    malformed = 0
    non_ip = 0
    for rec in records:
        try:
            pkt = decode_record(rec)
        except MalformedPacket:
            malformed += 1
            continue
        if pkt is None:
            non_ip += 1
            continue
        packets.append(pkt)
    return ParseResult(packets=packets, malformed=malformed, non_ip=non_ip,
                       warnings=list(reader.warnings), link_type=reader.link_type or 0,
                       format=reader.format, device_id=device_id)


def is_global_address(ip: str) -> bool:
    """True for internet-routable destinations (the ones destination analysis covers)."""
    addr = ipaddress.ip_address(ip)
    return not (addr.is_private or addr.is_loopback or addr.is_link_local
                or addr.is_multicast or addr.is_reserved or addr.is_unspecified)

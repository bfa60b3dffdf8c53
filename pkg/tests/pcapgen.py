"""Synthetic capture construction for tests.

Everything here is built with struct straight from the file/protocol layouts,
independently of the package's readers, so fixtures double as framing oracles.
"""

from __future__ import annotations

import socket
import struct


def ethernet(payload: bytes, ethertype: int = 0x0800,
             src=b"\x02\x00\x00\x00\x00\x01", dst=b"\x02\x00\x00\x00\x00\x02") -> bytes:
    return dst + src + struct.pack("!H", ethertype) + payload


def ipv4(src: str, dst: str, proto: int, body: bytes, ttl: int = 64,
         ident: int = 0) -> bytes:
    total = 20 + len(body)
    header = struct.pack("!BBHHHBBH4s4s", 0x45, 0, total, ident, 0, ttl, proto, 0,
                         socket.inet_aton(src), socket.inet_aton(dst))
    return header + body


def ipv6(src: str, dst: str, next_header: int, body: bytes) -> bytes:
    header = struct.pack("!IHBB16s16s", 6 << 28, len(body), next_header, 64,
                         socket.inet_pton(socket.AF_INET6, src),
                         socket.inet_pton(socket.AF_INET6, dst))
    return header + body


def udp(sport: int, dport: int, payload: bytes) -> bytes:
    return struct.pack("!HHHH", sport, dport, 8 + len(payload), 0) + payload


def tcp(sport: int, dport: int, seq: int, payload: bytes = b"", flags: int = 0x10,
        ack: int = 0) -> bytes:
    return struct.pack("!HHIIBBHHH", sport, dport, seq, ack, 5 << 4, flags,
                       65535, 0, 0) + payload


def udp_frame(src: str, dst: str, sport: int, dport: int, payload: bytes) -> bytes:
    return ethernet(ipv4(src, dst, 17, udp(sport, dport, payload)))


def tcp_frame(src: str, dst: str, sport: int, dport: int, seq: int,
              payload: bytes = b"", flags: int = 0x10, ack: int = 0) -> bytes:
    return ethernet(ipv4(src, dst, 6, tcp(sport, dport, seq, payload, flags, ack)))


def pcap_bytes(records, linktype: int = 1, snaplen: int = 262144,
               nano: bool = False, big_endian: bool = False) -> bytes:
    """records: iterable of (ts_sec, ts_frac, frame) or (ts_sec, ts_frac, frame, orig_len)."""
    endian = ">" if big_endian else "<"
    if nano:
        magic = b"\xa1\xb2\x3c\x4d" if big_endian else b"\x4d\x3c\xb2\xa1"
    else:
        magic = b"\xa1\xb2\xc3\xd4" if big_endian else b"\xd4\xc3\xb2\xa1"
    out = [magic, struct.pack(endian + "HHiIII", 2, 4, 0, 0, snaplen, linktype)]
    for rec in records:
        ts_sec, ts_frac, frame = rec[0], rec[1], rec[2]
        orig = rec[3] if len(rec) > 3 else len(frame)
        out.append(struct.pack(endian + "IIII", ts_sec, ts_frac, len(frame), orig))
        out.append(frame)
    return b"".join(out)


def _ng_block(block_type: int, body: bytes) -> bytes:
    pad = (4 - len(body) % 4) % 4
    total = 12 + len(body) + pad
    return struct.pack("<II", block_type, total) + body + b"\x00" * pad + struct.pack("<I", total)


def pcapng_bytes(records, linktype: int = 1, snaplen: int = 262144) -> bytes:
    shb_body = struct.pack("<IHHq", 0x1A2B3C4D, 1, 0, -1)
    idb_body = struct.pack("<HHI", linktype, 0, snaplen)
    out = [_ng_block(0x0A0D0D0A, shb_body), _ng_block(0x00000001, idb_body)]
    for rec in records:
        ts_sec, ts_usec, frame = rec[0], rec[1], rec[2]
        orig = rec[3] if len(rec) > 3 else len(frame)
        ts = ts_sec * 1_000_000 + ts_usec
        body = struct.pack("<IIIII", 0, ts >> 32, ts & 0xFFFFFFFF, len(frame), orig) + frame
        out.append(_ng_block(0x00000006, body))
    return b"".join(out)


# -- DNS construction ---------------------------------------------------------

def dns_name(name: str) -> bytes:
    out = b""
    for label in name.strip(".").split("."):
        raw = label.encode("ascii")
        out += bytes([len(raw)]) + raw
    return out + b"\x00"


def dns_question(name: str, qtype: int = 1) -> bytes:
    return dns_name(name) + struct.pack("!HH", qtype, 1)


def dns_rr(name: str, rtype: int, rdata: bytes, ttl: int = 300) -> bytes:
    return dns_name(name) + struct.pack("!HHIH", rtype, 1, ttl, len(rdata)) + rdata


def dns_response(query: str, answers, txid: int = 0x1234, qtype: int = 1) -> bytes:
    """answers: list of (owner, rtype, rdata) where rdata is bytes, an IPv4
    string, or a domain name for CNAMEs."""
    encoded = []
    for owner, rtype, rdata in answers:
        if isinstance(rdata, str):
            if rtype == 1:
                rdata = socket.inet_aton(rdata)
            elif rtype == 28:
                rdata = socket.inet_pton(socket.AF_INET6, rdata)
            else:
                rdata = dns_name(rdata)
        encoded.append(dns_rr(owner, rtype, rdata))
    header = struct.pack("!HHHHHH", txid, 0x8180, 1, len(encoded), 0, 0)
    return header + dns_question(query, qtype) + b"".join(encoded)


def dns_query(query: str, txid: int = 0x1234, qtype: int = 1) -> bytes:
    return struct.pack("!HHHHHH", txid, 0x0100, 1, 0, 0, 0) + dns_question(query, qtype)

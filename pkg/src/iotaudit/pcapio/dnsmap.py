"""Passive DNS: parse responses seen in the capture and build the IP -> domain
map that destination naming rests on. Lookups never fabricate: an unmapped IP
stays unmapped."""

from __future__ import annotations

import dataclasses
import struct

from .flows import FlowRecord
from .packet import Transport

TYPE_A = 1
TYPE_CNAME = 5
TYPE_AAAA = 28
TYPE_DNSKEY = 48


class DnsParseError(ValueError):
    pass


@dataclasses.dataclass
class DnsAnswer:
    name: str
    rtype: int
    rdata: bytes
    target: str | None = None  # decoded domain for CNAME, address text for A/AAAA


@dataclasses.dataclass
class DnsMessage:
    is_response: bool
    questions: list[tuple[str, int]]       # (name, qtype)
    answers: list[DnsAnswer]

    @property
    def has_dnskey(self) -> bool:
        return any(q[1] == TYPE_DNSKEY for q in self.questions) or \
            any(a.rtype == TYPE_DNSKEY for a in self.answers)


def _read_name(data: bytes, off: int, depth: int = 0) -> tuple[str, int]:
    if depth > 16:
        raise DnsParseError("compression loop")
    labels: list[str] = []
    while True:
        if off >= len(data):
            raise DnsParseError("name runs past message end")
        length = data[off]
        if length == 0:
            off += 1
            break
        if length & 0xC0 == 0xC0:
            if off + 2 > len(data):
                raise DnsParseError("truncated compression pointer")
            ptr = struct.unpack("!H", data[off:off + 2])[0] & 0x3FFF
            if ptr >= off:
                raise DnsParseError("forward compression pointer")
            suffix, _ = _read_name(data, ptr, depth + 1)
            labels.append(suffix)
            off += 2
            return ".".join(labels), off
        if length & 0xC0:
            raise DnsParseError("reserved label type")
        off += 1
        if off + length > len(data):
            raise DnsParseError("label runs past message end")
        labels.append(data[off:off + length].decode("ascii", errors="replace"))
        off += length
    return ".".join(labels), off


def parse_dns(data: bytes) -> DnsMessage:
    if len(data) < 12:
        raise DnsParseError("shorter than DNS header")
    flags, qd, an, ns, ar = struct.unpack("!HHHHH", data[2:12])
    off = 12
    questions = []
    for _ in range(qd):
        name, off = _read_name(data, off)
        if off + 4 > len(data):
            raise DnsParseError("truncated question")
        (qtype,) = struct.unpack("!H", data[off:off + 2])
        off += 4
        questions.append((name.lower(), qtype))
    answers = []
    for _ in range(an + ns + ar):
        if off >= len(data):
            break  # additional sections may be elided (e.g. TC responses)
        name, off = _read_name(data, off)
        if off + 10 > len(data):
            raise DnsParseError("truncated resource record")
        rtype, _rclass, _ttl, rdlen = struct.unpack("!HHIH", data[off:off + 10])
        off += 10
        if off + rdlen > len(data):
            raise DnsParseError("rdata runs past message end")
        rdata = data[off:off + rdlen]
        ans = DnsAnswer(name=name.lower(), rtype=rtype, rdata=rdata)
        if rtype == TYPE_CNAME:
            ans.target, _ = _read_name(data, off)
            ans.target = ans.target.lower()
        elif rtype == TYPE_A and rdlen == 4:
            ans.target = ".".join(str(b) for b in rdata)
        elif rtype == TYPE_AAAA and rdlen == 16:
            import socket
            ans.target = socket.inet_ntop(socket.AF_INET6, rdata)
        off += rdlen
        answers.append(ans)
    return DnsMessage(is_response=bool(flags & 0x8000), questions=questions,
                      answers=answers)


def extract_dns_messages(flow: FlowRecord) -> tuple[list[DnsMessage], int]:
    """Every well-formed DNS message in a flow, plus the undecodable count.

    UDP carries one message per datagram; TCP prefixes each with a length.
    """
    messages: list[DnsMessage] = []
    bad = 0
    if flow.key.transport == Transport.UDP.value:
        for pkt in flow.packets:
            if not pkt.payload:
                continue
            try:
                messages.append(parse_dns(pkt.payload))
            except DnsParseError:
                bad += 1
    else:
        for stream in (flow.payload_initiator, flow.payload_responder):
            off = 0
            while off + 2 <= len(stream):
                (mlen,) = struct.unpack("!H", stream[off:off + 2])
                chunk = stream[off + 2:off + 2 + mlen]
                off += 2 + mlen
                if len(chunk) < mlen:
                    bad += 1
                    break
                try:
                    messages.append(parse_dns(chunk))
                except DnsParseError:
                    bad += 1
    return messages, bad


@dataclasses.dataclass
class DnsMap:
    entries: dict[str, set[tuple[str, int]]] = dataclasses.field(default_factory=dict)
    malformed: int = 0

    def add(self, ip: str, domain: str, first_seen: int) -> None:
        self.entries.setdefault(ip, set()).add((domain, first_seen))

    def domains_for(self, ip: str) -> set[str]:
        return {d for d, _ in self.entries.get(ip, set())}

    def __len__(self) -> int:
        return len(self.entries)


def build_dns_map(flows: list[FlowRecord]) -> DnsMap:
    """Collect (answer IP -> query name) from every DNS response.

    CNAME chains are walked so the address maps to the name the client asked
    for, not the CDN host it was ultimately served from.
    """
    dns_map = DnsMap()
    for flow in flows:
        if "DNS" not in flow.protocol_tags:
            continue
        first_seen = flow.first_ts
        messages, bad = extract_dns_messages(flow)
        dns_map.malformed += bad
        for msg in messages:
            if not msg.is_response or not msg.questions:
                continue
            qname = msg.questions[0][0]
            # owner -> canonical target links from CNAME records
            cname = {a.name: a.target for a in msg.answers
                     if a.rtype == TYPE_CNAME and a.target}
            reachable = {qname}
            node = qname
            for _ in range(len(cname) + 1):
                if node in cname:
                    node = cname[node]
                    reachable.add(node)
                else:
                    break
            for ans in msg.answers:
                if ans.rtype in (TYPE_A, TYPE_AAAA) and ans.target:
                    domain = qname if ans.name in reachable else ans.name
                    dns_map.add(ans.target, domain, first_seen)
    return dns_map

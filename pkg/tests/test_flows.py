import random

from iotaudit.pcapio import parse_capture, assemble_flows
from iotaudit.pcapio.flows import FlowKey, REASSEMBLY_CAP
from iotaudit.pcapio.packet import Transport

import pcapgen


def parse(tmp_path, frames, name="cap.pcap"):
    p = tmp_path / name
    p.write_bytes(pcapgen.pcap_bytes(frames))
    return parse_capture(p)


def test_tcp_handshake_plus_data_is_one_flow(tmp_path):
    dev, srv = "10.0.0.2", "47.92.0.10"
    frames = [
        (0, 0, pcapgen.tcp_frame(dev, srv, 5000, 443, seq=100, flags=0x02)),           # SYN
        (0, 1, pcapgen.tcp_frame(srv, dev, 443, 5000, seq=900, flags=0x12, ack=101)),  # SYN/ACK
        (0, 2, pcapgen.tcp_frame(dev, srv, 5000, 443, seq=101, flags=0x10, ack=901)),  # ACK
        (0, 3, pcapgen.tcp_frame(dev, srv, 5000, 443, seq=101, payload=b"hello ")),
        (0, 4, pcapgen.tcp_frame(dev, srv, 5000, 443, seq=107, payload=b"world")),
    ]
    flows = assemble_flows(parse(tmp_path, frames).packets, "dev")
    assert len(flows) == 1
    flow = flows[0]
    assert flow.payload_initiator == b"hello world"
    assert flow.payload_responder == b""
    assert flow.initiator == (dev, 5000)
    assert len(flow.packets) == 5


def test_udp_gap_starts_new_flow(tmp_path):
    frames = [
        (0, 0, pcapgen.udp_frame("10.0.0.2", "1.2.3.4", 6000, 9000, b"a")),
        (300, 0, pcapgen.udp_frame("10.0.0.2", "1.2.3.4", 6000, 9000, b"b")),
    ]
    flows = assemble_flows(parse(tmp_path, frames).packets, "dev")
    assert len(flows) == 2
    frames_close = [
        (0, 0, pcapgen.udp_frame("10.0.0.2", "1.2.3.4", 6000, 9000, b"a")),
        (100, 0, pcapgen.udp_frame("10.0.0.2", "1.2.3.4", 6000, 9000, b"b")),
    ]
    assert len(assemble_flows(parse(tmp_path, frames_close, "b.pcap").packets, "dev")) == 1


def _oracle_grouping(packets, gap=120.0):
    """Independent brute-force grouping: linear scan keyed on the sorted
    endpoint pair, splitting UDP on the inactivity gap."""
    groups = {}
    order = []
    last = {}
    gen = {}
    for i, p in enumerate(packets):
        a = (p.src_ip, p.src_port if p.src_port is not None else -1)
        b = (p.dst_ip, p.dst_port if p.dst_port is not None else -1)
        base = (p.transport.value,) + tuple(sorted([a, b]))
        if p.transport == Transport.UDP:
            if base in last and p.timestamp - last[base] > gap:
                gen[base] = gen.get(base, 0) + 1
            last[base] = p.timestamp
        key = base + (gen.get(base, 0),)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(i)
    return sorted(tuple(v) for v in groups.values())


def test_random_interleaving_matches_oracle(tmp_path):
    rng = random.Random(42)
    frames = []
    t = 0.0
    for _ in range(600):
        t += rng.random() * 2
        conv = rng.randrange(50)
        dev_port = 40000 + conv
        srv = f"47.92.{conv % 8}.{conv % 250 + 1}"
        proto = "udp" if conv % 2 else "tcp"
        payload = bytes([rng.randrange(256) for _ in range(rng.randrange(1, 40))])
        if proto == "udp":
            if rng.random() < 0.1:
                t += 130  # force a gap split now and then
            frames.append((int(t), int(t % 1 * 1e6),
                           pcapgen.udp_frame("10.0.0.2", srv, dev_port, 9999, payload)))
        else:
            frames.append((int(t), int(t % 1 * 1e6),
                           pcapgen.tcp_frame("10.0.0.2", srv, dev_port, 443,
                                             seq=rng.randrange(1 << 30), payload=payload)))
    packets = parse(tmp_path, frames).packets
    flows = assemble_flows(packets, "dev")
    index = {id(p): i for i, p in enumerate(packets)}
    got = sorted(tuple(index[id(p)] for p in f.packets) for f in flows)
    assert got == _oracle_grouping(packets)


def test_byte_conservation(tmp_path):
    rng = random.Random(7)
    frames = []
    for i in range(200):
        kind = rng.randrange(3)
        if kind == 0:
            frames.append((i, 0, pcapgen.udp_frame("10.0.0.2", "8.8.8.8",
                                                   rng.randrange(1024, 65535), 53, b"x" * rng.randrange(50))))
        elif kind == 1:
            frames.append((i, 0, pcapgen.tcp_frame("10.0.0.2", "1.2.3.4", 5000, 80,
                                                   seq=i, payload=b"y" * rng.randrange(50))))
        else:  # ICMP lands in the OTHER bucket
            frames.append((i, 0, pcapgen.ethernet(
                pcapgen.ipv4("10.0.0.2", "9.9.9.9", 1, b"\x08\x00\x00\x00" + b"z" * 8))))
    packets = parse(tmp_path, frames).packets
    flows = assemble_flows(packets, "dev")
    assert sum(f.bytes_total for f in flows) == sum(p.wire_length for p in packets)
    assert sum(len(f.packets) for f in flows) == len(packets)


def test_out_of_order_and_duplicate_tcp(tmp_path):
    dev, srv = "10.0.0.2", "1.2.3.4"
    frames = [
        (0, 0, pcapgen.tcp_frame(dev, srv, 5000, 80, seq=1000, flags=0x02)),
        (0, 3, pcapgen.tcp_frame(dev, srv, 5000, 80, seq=1007, payload=b"world")),
        (0, 4, pcapgen.tcp_frame(dev, srv, 5000, 80, seq=1001, payload=b"hello ")),
        (0, 5, pcapgen.tcp_frame(dev, srv, 5000, 80, seq=1001, payload=b"hello ")),  # dup
    ]
    flows = assemble_flows(parse(tmp_path, frames).packets, "dev")
    flow = flows[0]
    assert flow.payload_initiator == b"hello world"
    total_segment_payload = 5 + 6 + 6
    assert len(flow.payload_initiator) <= total_segment_payload


def test_reassembly_never_exceeds_segment_sum(tmp_path):
    rng = random.Random(3)
    dev, srv = "10.0.0.2", "1.2.3.4"
    frames = [(0, 0, pcapgen.tcp_frame(dev, srv, 5000, 80, seq=500, flags=0x02))]
    total = 0
    seq = 501
    for i in range(30):
        payload = bytes([65 + i % 26]) * rng.randrange(1, 30)
        total += len(payload)
        jitter = rng.choice([-3, 0, 0, 2, 5])  # overlaps and gaps
        frames.append((0, i + 1, pcapgen.tcp_frame(dev, srv, 5000, 80,
                                                   seq=max(501, seq + jitter), payload=payload)))
        seq += len(payload)
    flows = assemble_flows(parse(tmp_path, frames).packets, "dev")
    assert len(flows[0].payload_initiator) <= total


def test_reassembly_cap_flags_truncation(tmp_path):
    dev, srv = "10.0.0.2", "1.2.3.4"
    chunk = b"A" * 0x8000
    frames = []
    seq = 1
    for i in range(40):  # 1.25 MiB > 1 MiB cap
        frames.append((0, i, pcapgen.tcp_frame(dev, srv, 5000, 80, seq=seq, payload=chunk)))
        seq += len(chunk)
    flows = assemble_flows(parse(tmp_path, frames).packets, "dev")
    assert flows[0].truncated
    assert len(flows[0].payload_initiator) == REASSEMBLY_CAP


def test_protocol_tags(tmp_path):
    dev = "10.0.0.2"
    dns = pcapgen.dns_response("dns.google.com", [("dns.google.com", 1, "8.8.8.8")])
    frames = [
        (0, 0, pcapgen.udp_frame("8.8.8.8", dev, 53, 40000, dns)),
        (1, 0, pcapgen.tcp_frame(dev, "1.2.3.4", 5000, 443, seq=1,
                                 payload=b"\x16\x03\x03\x00\x05hello")),
        (2, 0, pcapgen.tcp_frame(dev, "1.2.3.5", 5001, 80, seq=1,
                                 payload=b"GET / HTTP/1.1\r\nHost: x\r\n\r\n")),
        (3, 0, pcapgen.udp_frame(dev, "162.159.200.1", 40001, 123, b"\x1b" + b"\x00" * 47)),
    ]
    flows = assemble_flows(parse(tmp_path, frames).packets, "dev")
    tags = {f.key.port_a if f.key.port_a in (53, 80, 123, 443) else f.key.port_b:
            f.protocol_tags for f in flows}
    assert "DNS" in tags[53]
    assert "TLS" in tags[443]
    assert "HTTP" in tags[80]
    assert "NTP" in tags[123]


def test_deterministic_ordering(tmp_path):
    rng = random.Random(11)
    frames = [(i, rng.randrange(1_000_000),
               pcapgen.udp_frame("10.0.0.2", f"1.2.3.{rng.randrange(1, 200)}",
                                 40000 + rng.randrange(100), 9000, b"d"))
              for i in range(100)]
    packets = parse(tmp_path, frames).packets
    keys1 = [str(f.key) for f in assemble_flows(packets, "dev")]
    keys2 = [str(f.key) for f in assemble_flows(packets, "dev")]
    assert keys1 == keys2


def test_canonical_key_order_independent():
    k1 = FlowKey.canonical(Transport.TCP, "10.0.0.2", 5000, "1.2.3.4", 443)
    k2 = FlowKey.canonical(Transport.TCP, "1.2.3.4", 443, "10.0.0.2", 5000)
    assert k1 == k2

from .pcap import CaptureReader, PcapWriter, RawRecord, UnsupportedLinkType
from .packet import PacketRecord, Transport, decode_record, ParseResult, parse_capture
from .flows import FlowKey, FlowRecord, assemble_flows
from .dnsmap import DnsMap, build_dns_map

__all__ = [
    "CaptureReader", "PcapWriter", "RawRecord", "UnsupportedLinkType",
    "PacketRecord", "Transport", "decode_record", "ParseResult", "parse_capture",
    "FlowKey", "FlowRecord", "assemble_flows",
    "DnsMap", "build_dns_map",
]

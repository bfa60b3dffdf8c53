"""Capture-file framing: classic pcap and pcapng readers, classic pcap writer.

The reader yields raw records (timestamp + captured bytes); packet decoding is
a separate layer so segmentation can repartition captures byte-for-byte
without understanding their contents.
"""

from __future__ import annotations

import dataclasses
import struct
from pathlib import Path

PCAP_MAGIC_LE = b"\xd4\xc3\xb2\xa1"
PCAP_MAGIC_BE = b"\xa1\xb2\xc3\xd4"
PCAP_MAGIC_LE_NANO = b"\x4d\x3c\xb2\xa1"
PCAP_MAGIC_BE_NANO = b"\xa1\xb2\x3c\x4d"
PCAPNG_MAGIC = b"\x0a\x0d\x0d\x0a"

LINKTYPE_ETHERNET = 1
LINKTYPE_LINUX_SLL = 113
LINKTYPE_LINUX_SLL2 = 276

SUPPORTED_LINK_TYPES = {LINKTYPE_ETHERNET, LINKTYPE_LINUX_SLL, LINKTYPE_LINUX_SLL2}


class CaptureFormatError(ValueError):
    """File is not a parseable pcap/pcapng capture."""


class UnsupportedLinkType(ValueError):
    def __init__(self, link_type: int):
        self.link_type = link_type
        super().__init__(f"unsupported link-layer type {link_type} "
                         f"(supported: Ethernet={LINKTYPE_ETHERNET}, "
                         f"Linux SLL={LINKTYPE_LINUX_SLL}, SLL2={LINKTYPE_LINUX_SLL2})")


@dataclasses.dataclass
class RawRecord:
    ts_sec: int
    ts_usec: int
    data: bytes       # captured bytes (may be shorter than orig_len)
    orig_len: int
    link_type: int
    index: int        # position in the file

    @property
    def ts_micros(self) -> int:
        return self.ts_sec * 1_000_000 + self.ts_usec


class CaptureReader:
    """Reads classic pcap (micro/nano, either byte order) and pcapng files.

    Format is auto-detected from magic bytes. A final record cut short by the
    end of the file is reported via ``warnings`` rather than raised, matching
    what an interrupted tcpdump leaves behind.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.warnings: list[str] = []
        self.format: str
        with open(self.path, "rb") as fh:
            magic = fh.read(4)
        if magic in (PCAP_MAGIC_LE, PCAP_MAGIC_BE, PCAP_MAGIC_LE_NANO, PCAP_MAGIC_BE_NANO):
            self.format = "pcap"
        elif magic == PCAPNG_MAGIC:
            self.format = "pcapng"
        else:
            raise CaptureFormatError(
                f"{self.path}: magic bytes {magic.hex()} match neither pcap nor pcapng")
        self._records: list[RawRecord] | None = None
        self.snaplen: int = 0
        self.link_type: int | None = None  # link type of the first interface

    def records(self) -> list[RawRecord]:
        if self._records is None:
            data = self.path.read_bytes()
            if self.format == "pcap":
                self._records = self._read_pcap(data)
            else:
                self._records = self._read_pcapng(data)
        return self._records

    def _read_pcap(self, data: bytes) -> list[RawRecord]:
        magic = data[:4]
        if magic == PCAP_MAGIC_LE:
            endian, nano = "<", False
        elif magic == PCAP_MAGIC_BE:
            endian, nano = ">", False
        elif magic == PCAP_MAGIC_LE_NANO:
            endian, nano = "<", True
        else:
            endian, nano = ">", True
        if len(data) < 24:
            raise CaptureFormatError(f"{self.path}: truncated pcap global header")
        _ver_maj, _ver_min, _zone, _sig, snaplen, network = struct.unpack(
            endian + "HHiIII", data[4:24])
        self.snaplen = snaplen
        self.link_type = network
        records: list[RawRecord] = []
        off, idx = 24, 0
        while off < len(data):
            if off + 16 > len(data):
                self.warnings.append(
                    f"truncated record header at byte {off}; stopped reading")
                break
            ts_sec, ts_frac, incl, orig = struct.unpack(endian + "IIII", data[off:off + 16])
            if incl > max(snaplen, 0x40000) or off + 16 + incl > len(data):
                self.warnings.append(
                    f"record {idx} at byte {off} truncated or over-long "
                    f"(incl_len={incl}); stopped reading")
                break
            ts_usec = ts_frac // 1000 if nano else ts_frac
            records.append(RawRecord(ts_sec, ts_usec, data[off + 16:off + 16 + incl],
                                     orig, network, idx))
            off += 16 + incl
            idx += 1
        return records

    def _read_pcapng(self, data: bytes) -> list[RawRecord]:
        records: list[RawRecord] = []
        interfaces: list[tuple[int, int]] = []  # (link_type, ts_divisor to micros)
        endian = "<"
        off, idx = 0, 0
        while off + 12 <= len(data):
            block_type_raw = data[off:off + 4]
            if block_type_raw == PCAPNG_MAGIC:  # section header: resolve byte order
                bom = data[off + 8:off + 12]
                if bom == b"\x4d\x3c\x2b\x1a":
                    endian = "<"
                elif bom == b"\x1a\x2b\x3c\x4d":
                    endian = ">"
                else:
                    raise CaptureFormatError(f"{self.path}: bad pcapng byte-order magic")
            (block_type,) = struct.unpack(endian + "I", block_type_raw)
            (total_len,) = struct.unpack(endian + "I", data[off + 4:off + 8])
            if total_len < 12 or off + total_len > len(data):
                self.warnings.append(
                    f"truncated pcapng block at byte {off}; stopped reading")
                break
            body = data[off + 8:off + total_len - 4]
            if block_type == 0x00000001:  # interface description
                link_type, _res = struct.unpack(endian + "HH", body[:4])
                (snaplen,) = struct.unpack(endian + "I", body[4:8])
                self.snaplen = max(self.snaplen, snaplen)
                tsresol = self._if_tsresol(body[8:], endian)
                interfaces.append((link_type, tsresol))
                if self.link_type is None:
                    self.link_type = link_type
            elif block_type == 0x00000006:  # enhanced packet
                if_id, ts_high, ts_low, cap_len, orig_len = struct.unpack(
                    endian + "IIIII", body[:20])
                pkt = body[20:20 + cap_len]
                if if_id >= len(interfaces):
                    self.warnings.append(f"packet block {idx} references unknown interface {if_id}; skipped")
                else:
                    link_type, resol = interfaces[if_id]
                    ts = (ts_high << 32) | ts_low
                    micros = ts * 1_000_000 // resol
                    records.append(RawRecord(micros // 1_000_000, micros % 1_000_000,
                                             pkt, orig_len, link_type, idx))
                    idx += 1
            elif block_type == 0x00000003:  # simple packet
                (orig_len,) = struct.unpack(endian + "I", body[:4])
                if not interfaces:
                    self.warnings.append("simple packet block before any interface; skipped")
                else:
                    link_type, _ = interfaces[0]
                    cap = min(orig_len, self.snaplen) if self.snaplen else orig_len
                    records.append(RawRecord(0, 0, body[4:4 + cap], orig_len, link_type, idx))
                    idx += 1
            # all other block types (name resolution, statistics, ...) are skipped
            off += total_len
        return records

    @staticmethod
    def _if_tsresol(options: bytes, endian: str) -> int:
        """Ticks per second declared by the interface (default 10^6)."""
        off = 0
        while off + 4 <= len(options):
            code, length = struct.unpack(endian + "HH", options[off:off + 4])
            if code == 0:
                break
            val = options[off + 4:off + 4 + length]
            if code == 9 and length >= 1:
                raw = val[0]
                return 2 ** (raw & 0x7F) if raw & 0x80 else 10 ** (raw & 0x7F)
            off += 4 + length + ((4 - length % 4) % 4)
        return 1_000_000


class PcapWriter:
    """Writes classic little-endian microsecond pcap; output is deterministic."""

    def __init__(self, path: str | Path, link_type: int, snaplen: int = 262144):
        self.path = Path(path)
        self._fh = open(self.path, "wb")
        self._fh.write(PCAP_MAGIC_LE)
        self._fh.write(struct.pack("<HHiIII", 2, 4, 0, 0, snaplen, link_type))

    def write_record(self, rec: RawRecord) -> None:
        self._fh.write(struct.pack("<IIII", rec.ts_sec, rec.ts_usec,
                                   len(rec.data), rec.orig_len))
        self._fh.write(rec.data)

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "PcapWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

"""IP geolocation: offline snapshot first, optional online API on miss,
persistent cache so a given address is fetched at most once per corpus run."""

from __future__ import annotations

import dataclasses
import ipaddress
import json
import logging
import os
import threading
import time
from importlib import resources
from pathlib import Path

import requests

from ..pcapio.packet import is_global_address

logger = logging.getLogger(__name__)

UNKNOWN = "UNKNOWN"

DEFAULT_ENDPOINT_ENV = "IOTAUDIT_GEO_ENDPOINT"


@dataclasses.dataclass(frozen=True)
class GeoResult:
    country: str           # ISO 3166-1 alpha-2 or UNKNOWN
    org: str
    asn: int | None = None
    source: str = "offline"


class GeoProvider:
    """Resolves global-scope IPs to (country, organization).

    Lookup order is fixed: offline snapshot, then cache of past online
    answers, then the online endpoint (when configured). Online lookups are
    rate limited and each IP is queried at most once per run.
    """

    def __init__(self, offline_db: str | Path | None = None,
                 online_endpoint: str | None = None,
                 cache_path: str | Path | None = None,
                 rate_limit_per_sec: float = 1.0,
                 session: requests.Session | None = None,
                 clock=time):
        self._networks: list[tuple[ipaddress._BaseNetwork, GeoResult]] = []
        self.snapshot_version = "unknown"
        self._load_offline(offline_db)
        self.online_endpoint = online_endpoint or os.environ.get(DEFAULT_ENDPOINT_ENV)
        self.cache_path = Path(cache_path) if cache_path else None
        self._cache: dict[str, dict] = {}
        if self.cache_path and self.cache_path.exists():
            self._cache = json.loads(self.cache_path.read_text(encoding="utf-8"))
        self._attempted_online: set[str] = set()
        self._min_interval = 1.0 / rate_limit_per_sec if rate_limit_per_sec > 0 else 0.0
        self._last_request = 0.0
        self._session = session or requests.Session()
        self._clock = clock
        self._lock = threading.Lock()
        self.coverage = {"offline": 0, "cache": 0, "online": 0, "unknown": 0}

    def _load_offline(self, path: str | Path | None) -> None:
        if path is None:
            text = resources.files("iotaudit.data").joinpath("geo_snapshot.csv").read_text()
        else:
            text = Path(path).read_text(encoding="utf-8")
        for line in text.splitlines():
            line = line.strip()
            if line.startswith("#"):
                if "snapshot" in line:
                    self.snapshot_version = line.lstrip("# ").strip()
                continue
            if not line or line.startswith("network,"):
                continue
            network, country, org, asn = (line.split(",") + [None] * 4)[:4]
            self._networks.append((
                ipaddress.ip_network(network),
                GeoResult(country=country, org=org,
                          asn=int(asn) if asn else None, source="offline")))
        # longest prefix first so the first hit wins
        self._networks.sort(key=lambda item: item[0].prefixlen, reverse=True)

    def _offline_lookup(self, addr) -> GeoResult | None:
        for network, result in self._networks:
            if addr.version == network.version and addr in network:
                return result
        return None

    def _online_lookup(self, ip: str) -> GeoResult | None:
        if not self.online_endpoint or ip in self._attempted_online:
            return None
        self._attempted_online.add(ip)
        wait = self._min_interval - (self._clock.time() - self._last_request)
        if wait > 0:
            self._clock.sleep(wait)
        self._last_request = self._clock.time()
        url = self.online_endpoint.rstrip("/") + "/" + ip
        try:
            response = self._session.get(url, timeout=10)
            response.raise_for_status()
            doc = response.json()
        except (requests.RequestException, ValueError) as exc:
            logger.warning("online geolocation failed for %s: %s", ip, exc)
            return None
        result = GeoResult(country=str(doc.get("country") or UNKNOWN),
                           org=str(doc.get("org") or UNKNOWN), source="online")
        with self._lock:
            self._cache[ip] = {"country": result.country, "org": result.org,
                               "fetched_at": self._clock.time()}
            self._commit_cache()
        return result

    def _commit_cache(self) -> None:
        if not self.cache_path:
            return
        tmp = self.cache_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(self._cache, sort_keys=True, indent=1),
                       encoding="utf-8")
        tmp.replace(self.cache_path)

    def geolocate(self, ip: str) -> GeoResult:
        """(country, organization) for one global-scope address."""
        if not is_global_address(ip):
            raise ValueError(f"{ip} is not a global-scope address; local and "
                             "multicast destinations are excluded upstream")
        addr = ipaddress.ip_address(ip)
        hit = self._offline_lookup(addr)
        if hit is not None:
            self.coverage["offline"] += 1
            return hit
        cached = self._cache.get(ip)
        if cached is not None:
            self.coverage["cache"] += 1
            return GeoResult(country=cached["country"], org=cached["org"], source="cache")
        online = self._online_lookup(ip)
        if online is not None:
            self.coverage["online"] += 1
            return online
        self.coverage["unknown"] += 1
        return GeoResult(country=UNKNOWN, org=UNKNOWN, source="none")

from .geo import GeoProvider, GeoResult
from .party import (Party, PartyPolicyMap, classify_party, load_policy_map,
                    normalize_org, load_aliases)
from .stats import (DestinationRecord, ProportionTable, build_destinations,
                    proportion_table, server_party_counts, organization_ranking,
                    FlowCountry, ServerContact)

__all__ = [
    "GeoProvider", "GeoResult",
    "Party", "PartyPolicyMap", "classify_party", "load_policy_map",
    "normalize_org", "load_aliases",
    "DestinationRecord", "ProportionTable", "build_destinations",
    "proportion_table", "server_party_counts", "organization_ranking",
    "FlowCountry", "ServerContact",
]

from .entropy import payload_entropy
from .magic import MagicNumberTable, load_magic_table
from .cascade import (Thresholds, Verdict, Rule, TrafficClassification,
                      classify_flow, classify_flows, encryption_heatmap, FlowTraffic)

__all__ = [
    "payload_entropy",
    "MagicNumberTable", "load_magic_table",
    "Thresholds", "Verdict", "Rule", "TrafficClassification",
    "classify_flow", "classify_flows", "encryption_heatmap", "FlowTraffic",
]

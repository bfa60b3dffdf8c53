"""Traffic auditing toolkit for consumer IoT captures, segmented by device lifecycle phase."""

__version__ = "0.1.0"

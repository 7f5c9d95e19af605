"""River Thames monitoring-site network: 20 sites, flow runs upstream -> downstream."""
from __future__ import annotations

from .dag import Dag, new_dag

SITES = (
    "WI", "CN", "LE", "TH", "CL", "EV", "TM", "RA", "OC", "CH",
    "PA", "EN", "CU", "LO", "TN", "TS", "TW", "TSO", "KE", "TR",
)

# (downstream, upstream)
FLOWS = (
    ("TN", "WI"), ("TN", "CN"), ("TN", "LE"), ("TN", "TH"), ("TN", "CL"),
    ("TS", "TN"), ("TS", "EV"),
    ("TW", "TM"), ("TW", "RA"), ("TW", "OC"), ("TW", "CH"), ("TW", "TS"),
    ("TSO", "TW"), ("TSO", "PA"), ("TSO", "KE"),
    ("TR", "TSO"), ("TR", "CU"), ("TR", "LO"),
    ("KE", "EN"),
)

# intermediary and sink sites held out for imputation
MASKED_SITES = ("TN", "TS", "TW", "TSO", "KE", "TR")


def site_index(name: str) -> int:
    return SITES.index(name)


def thames_dag() -> Dag:
    return new_dag(len(SITES), [(site_index(t), site_index(s), 1.0) for t, s in FLOWS])


def masked_nodes() -> list[int]:
    return sorted(site_index(s) for s in MASKED_SITES)

from .cch import CCHIndex, CCHSearcher, CustomizedCCH, cch_customize, cch_preprocess, cch_query
from .dijkstra import NoPathError, dijkstra, distances_from
from .order import nested_dissection_order

__all__ = [
    "CCHIndex",
    "CCHSearcher",
    "CustomizedCCH",
    "NoPathError",
    "cch_customize",
    "cch_preprocess",
    "cch_query",
    "dijkstra",
    "distances_from",
    "nested_dissection_order",
]

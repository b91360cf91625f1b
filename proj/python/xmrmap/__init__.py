"""Monero P2P topology inference: peer-list parsing, neighbor inference,
validation and graph analytics."""

from ._core import (
    InputError,
    InvariantError,
    ProtocolError,
    XmrmapError,
    aggregate,
    attack,
    betweenness,
    decode_flow,
    degree,
    encode_flow,
    infer_neighbors,
    lcc_size,
    normalize_address,
    parse_trace_line,
    run_cli,
    simulate,
    two_means_split,
    validate,
)

__all__ = [
    "InputError",
    "InvariantError",
    "ProtocolError",
    "XmrmapError",
    "aggregate",
    "attack",
    "betweenness",
    "decode_flow",
    "degree",
    "encode_flow",
    "infer_neighbors",
    "lcc_size",
    "normalize_address",
    "parse_trace_line",
    "run_cli",
    "simulate",
    "two_means_split",
    "validate",
]

"""SDP-guided random-walk balancing of vector sequences with small prefix discrepancy."""

from balance.instance import (
    L2_UNIT,
    LINF_UNIT,
    VectorInstance,
    balance_to_zero_sum,
    generate_hadamard_like,
    generate_random,
    generate_zero_sum,
    load_instance,
    save_instance,
)
from balance.walk import ModeParams, RunReport, run
from balance.steinitz import steinitz_order, verify_ordering

__all__ = [
    "L2_UNIT",
    "LINF_UNIT",
    "VectorInstance",
    "balance_to_zero_sum",
    "generate_hadamard_like",
    "generate_random",
    "generate_zero_sum",
    "load_instance",
    "save_instance",
    "ModeParams",
    "RunReport",
    "run",
    "steinitz_order",
    "verify_ordering",
]

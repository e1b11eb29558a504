"""Verification of FIFO systems under channel interference and crash-stop failures."""

from .bench import run_bench, transform_corrupt, transform_lossy
from .crash import augment_crash_handling, expand_broadcast, infer_partition, is_crash_handling
from .interference import (Interference, explore, interference_closure, is_execution, reach_k,
                           successors)
from .io import dump_system, load_system, load_trace, parse_system, parse_trace, save_system
from .kmc import (NotCsaError, check_k_er, check_k_exhaustive, check_k_pg, check_kmc,
                  check_kwmc, find_least_k)
from .model import (CRASH, Channel, Configuration, FifoAutomaton, Internal, Message, Receive,
                    ResourceLimitError, Send, System, ValidationError, build_system,
                    initial_configuration, is_csa, parse_action, validate_system)
from .rsc import (build_a_bv, build_a_rsc, check_irsc, conflict_graph, is_irsc_equivalent,
                  valid_communications)
from .session import (bounded_trace_equiv, compose_types, occurs_in, parse_type, parse_types,
                      translate)

__all__ = [
    "CRASH", "Channel", "Configuration", "FifoAutomaton", "Interference", "Internal", "Message",
    "NotCsaError", "Receive", "ResourceLimitError", "Send", "System", "ValidationError",
    "augment_crash_handling", "bounded_trace_equiv", "build_a_bv", "build_a_rsc", "build_system",
    "check_irsc", "check_k_er", "check_k_exhaustive", "check_k_pg", "check_kmc", "check_kwmc",
    "compose_types", "conflict_graph", "dump_system", "expand_broadcast", "explore",
    "find_least_k", "infer_partition", "initial_configuration", "interference_closure",
    "is_crash_handling", "is_csa", "is_execution", "is_irsc_equivalent", "load_system",
    "load_trace", "occurs_in", "parse_action", "parse_system", "parse_trace", "parse_type",
    "parse_types", "reach_k", "run_bench", "save_system", "successors", "transform_corrupt",
    "transform_lossy", "translate", "valid_communications", "validate_system",
]

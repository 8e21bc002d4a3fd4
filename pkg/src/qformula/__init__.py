"""Quantum formula toolkit.

Simulation of quantum circuits that compute Boolean functions, with a
polynomial mixed-state engine for formulas, semantics-preserving rewrites
including path squeezing, gate-truncation error analysis, compilation to
fixed-point Boolean netlists, and subfunction-counting lower-bound reports.
"""

from .circuit import (
    Circuit,
    Gate,
    NAMED_GATES,
    NotFormulaError,
    NotUnitaryError,
    SchemaError,
    computation_graph,
    embed_gate,
    is_formula,
    named_gate,
    parse_circuit,
    serialize_circuit,
)
from .simulator import (
    SuperOp,
    formula_run,
    gate_superop,
    kraus_decomposition,
    statevector_run,
    stinespring_dilation,
    truthtable,
)
from .rewrite import (
    commute_disjoint,
    decompose_paths,
    postpone_gates,
    squeeze_formula,
    squeeze_path,
)
from .approx import (
    circuit_error_bound,
    diamond_lower_bound,
    eta,
    ov_ow_bound,
    truncate_gate,
    verify_truncation,
)
from .boolcompile import compile_formula, eval_netlist, netlist_stats
from .bounds import (
    ed_function,
    ed_sigma_lower,
    nechiporuk_bound,
    subfunction_count,
    warren_count,
    appendix_count,
)

__version__ = "0.1.0"

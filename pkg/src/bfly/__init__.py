"""bfly: a 2-parity XOR-only MDS array code (butterfly code).

Encodes k information columns into k+2 storage nodes such that any two node
losses are decodable, a single lost information node is rebuilt by reading
exactly half of each survivor, and all arithmetic is blockwise XOR.
"""

from .core import (
    BUTTERFLY,
    HORIZONTAL,
    CodeParams,
    Coord,
    ErasurePattern,
    NodeId,
    RepairEquation,
    RepairPlan,
    Stripe,
    all_nodes,
    bit,
    butterfly_set,
    color,
    dark_rows,
    decode_erasures,
    encode,
    info_node,
    iteration_row,
    iteration_row_pair,
    local_set,
    orient_columns,
    reflect_row,
    repair_node,
    single_repair_equations,
    single_repair_plan,
    update_parity_coords,
)
from .errors import (
    BflyError,
    FormatError,
    MissingElementError,
    SingularSystemError,
    UnrecoverableLossError,
)

__version__ = "0.1.0"

__all__ = [
    "BUTTERFLY",
    "HORIZONTAL",
    "BflyError",
    "CodeParams",
    "Coord",
    "ErasurePattern",
    "FormatError",
    "MissingElementError",
    "NodeId",
    "RepairEquation",
    "RepairPlan",
    "SingularSystemError",
    "Stripe",
    "UnrecoverableLossError",
    "all_nodes",
    "bit",
    "butterfly_set",
    "color",
    "dark_rows",
    "decode_erasures",
    "encode",
    "info_node",
    "iteration_row",
    "iteration_row_pair",
    "local_set",
    "orient_columns",
    "reflect_row",
    "repair_node",
    "single_repair_equations",
    "single_repair_plan",
    "update_parity_coords",
    "__version__",
]

"""Exact access and update accounting.

Ratios and means are exact rationals, never floats, so the repair-access
and update-measure claims can be checked with equality.  Update statistics
are computed over the padded geometry (all k columns, virtual included);
a user-facing view restricted to the stored columns is reported alongside,
clearly labeled.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from .core import (
    BUTTERFLY,
    HORIZONTAL,
    CodeParams,
    Coord,
    NodeId,
    check_node,
    info_node,
    node_sort_key,
    single_repair_plan,
    update_parity_coords,
)

REPORT_FORMAT_VERSION = 1


def _frac_str(f: Fraction) -> str:
    return f"{f.numerator}/{f.denominator}" if f.denominator != 1 else str(f.numerator)


@dataclass(frozen=True)
class AccessReport:
    """Elements read from each surviving node to rebuild one failed node."""

    failed: NodeId
    node_elements: int
    reads: Mapping[NodeId, int]

    @property
    def ratios(self) -> dict[NodeId, Fraction]:
        return {n: Fraction(c, self.node_elements) for n, c in self.reads.items()}

    def to_text(self) -> str:
        lines = [f"repair target: {self.failed.label()}"]
        for node in sorted(self.reads, key=node_sort_key):
            ratio = _frac_str(self.ratios[node])
            lines.append(f"  read {self.reads[node]}/{self.node_elements} "
                         f"elements of {node.label()} (ratio {ratio})")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "format_version": REPORT_FORMAT_VERSION,
            "report": "repair-access",
            "failed": self.failed.label(),
            "node_elements": self.node_elements,
            "reads": {n.label(): c for n, c in sorted(self.reads.items(),
                                                      key=lambda kv: node_sort_key(kv[0]))},
            "ratios": {n.label(): _frac_str(r) for n, r in sorted(self.ratios.items(),
                                                                  key=lambda kv: node_sort_key(kv[0]))},
        }


def measure_repair_access(params: CodeParams, failed: NodeId) -> AccessReport:
    """Per-node read counts for a single-node repair.

    Information-node repair reads exactly half of every survivor; a failed
    parity node is re-encoded and reads every information element (ratio 1)
    and nothing from the other parity.
    """
    check_node(params, failed)
    if failed.is_info:
        plan = single_repair_plan(params, failed)
        reads = {n: len(r) for n, r in plan.reads.items()}
    else:
        reads = {info_node(j): params.rows for j in range(params.k_user)}
        reads[BUTTERFLY if failed == HORIZONTAL else HORIZONTAL] = 0
    return AccessReport(failed=failed, node_elements=params.rows, reads=reads)


@dataclass(frozen=True)
class UpdateReport:
    """Parity-touch counts for a one-element update, over the whole array."""

    params: CodeParams
    touch: Mapping[Coord, int]
    mean: Fraction
    max: int
    stored_mean: Fraction
    stored_max: int

    def to_text(self) -> str:
        return "\n".join([
            f"update measure over all {self.params.k} columns (padded):",
            f"  mean {_frac_str(self.mean)}   worst {self.max}",
            f"update measure over the {self.params.k_user} stored columns:",
            f"  mean {_frac_str(self.stored_mean)}   worst {self.stored_max}",
        ])

    def to_dict(self) -> dict:
        return {
            "format_version": REPORT_FORMAT_VERSION,
            "report": "update-measure",
            "k_user": self.params.k_user,
            "k": self.params.k,
            "padded": {"mean": _frac_str(self.mean), "max": self.max},
            "stored": {"mean": _frac_str(self.stored_mean), "max": self.stored_max},
        }


def measure_update(params: CodeParams) -> UpdateReport:
    """Touch counts for every element, with exact mean and worst case."""
    touch: dict[Coord, int] = {}
    for i in range(params.rows):
        for j in range(params.k):
            c = Coord(i, j)
            touch[c] = len(update_parity_coords(params, c))
    all_counts = list(touch.values())
    stored_counts = [n for c, n in touch.items() if c.col < params.k_user]
    return UpdateReport(
        params=params,
        touch=touch,
        mean=Fraction(sum(all_counts), len(all_counts)),
        max=max(all_counts),
        stored_mean=Fraction(sum(stored_counts), len(stored_counts)),
        stored_max=max(stored_counts),
    )

"""Butterfly-code core: parity sets, encoding, repair, and erasure decoding.

The code stores k information columns (k odd) of 2^(k-1) elements each, plus
a horizontal parity column and a butterfly parity column, and every relation
is a plain XOR of fixed-size octet blocks.  An even user column count is
padded with one all-zero virtual column at index k-1; the virtual column is
never stored and never counted as access.

Every operation here is a pure function of its arguments; nothing is shared
or mutated across calls, so concurrent use is safe.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Iterator, Mapping, NamedTuple

import numpy as np

from . import kernels
from .errors import MissingElementError

MAX_K = 15

DARK = 0
WHITE = 1


class Coord(NamedTuple):
    """Row/column address of one information element within a stripe."""

    row: int
    col: int


@dataclass(frozen=True)
class CodeParams:
    """Code geometry derived from the user column count.

    k is k_user rounded up to the next odd number; the code has 2^(k-1)
    rows and k_user+2 stored nodes (n counts the virtual column too).
    """

    k_user: int
    block_size: int = 4096

    def __post_init__(self) -> None:
        if self.k_user < 1:
            raise ValueError("k_user must be >= 1")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if self.k > MAX_K:
            raise ValueError(f"k={self.k} exceeds the cap of {MAX_K}"
                             f" (rows would be 2^{self.k - 1})")

    @property
    def k(self) -> int:
        return self.k_user if self.k_user % 2 == 1 else self.k_user + 1

    @property
    def rows(self) -> int:
        return 1 << (self.k - 1)

    @property
    def n(self) -> int:
        """Total node count including the virtual padding column."""
        return self.k + 2

    @property
    def stored_nodes(self) -> int:
        """Nodes that actually exist on storage: k_user info + 2 parity."""
        return self.k_user + 2

    @property
    def is_padded(self) -> bool:
        return self.k != self.k_user


def is_virtual_col(params: CodeParams, col: int) -> bool:
    return params.is_padded and col == params.k - 1


@dataclass(frozen=True)
class NodeId:
    """A storage node: one information column or one of the two parities."""

    kind: str
    index: int = -1

    def __post_init__(self) -> None:
        if self.kind not in ("info", "horizontal", "butterfly"):
            raise ValueError(f"unknown node kind {self.kind!r}")
        if (self.kind == "info") != (self.index >= 0):
            raise ValueError("info nodes carry a column index, parity nodes do not")

    @property
    def is_info(self) -> bool:
        return self.kind == "info"

    def label(self) -> str:
        return f"info-{self.index}" if self.is_info else self.kind


def info_node(col: int) -> NodeId:
    return NodeId("info", col)


HORIZONTAL = NodeId("horizontal")
BUTTERFLY = NodeId("butterfly")


def node_sort_key(node: NodeId) -> tuple[int, int]:
    order = {"info": 0, "horizontal": 1, "butterfly": 2}
    return (order[node.kind], node.index)


def all_nodes(params: CodeParams) -> list[NodeId]:
    """Every stored node, info columns first, then the two parities."""
    return [info_node(j) for j in range(params.k_user)] + [HORIZONTAL, BUTTERFLY]


def check_node(params: CodeParams, node: NodeId) -> None:
    if node.is_info and not 0 <= node.index < params.k_user:
        raise ValueError(f"info column {node.index} is not a stored column"
                         f" (k_user={params.k_user})")


@dataclass(frozen=True)
class ErasurePattern:
    """Set of at most two failed nodes."""

    failed: frozenset[NodeId]

    def __post_init__(self) -> None:
        if len(self.failed) > 2:
            raise ValueError("at most 2 failed nodes are decodable")

    @classmethod
    def of(cls, *nodes: NodeId) -> "ErasurePattern":
        return cls(frozenset(nodes))

    def __iter__(self) -> Iterator[NodeId]:
        return iter(sorted(self.failed, key=node_sort_key))

    def __len__(self) -> int:
        return len(self.failed)

    def __contains__(self, node: NodeId) -> bool:
        return node in self.failed

    def label(self) -> str:
        return "{" + ", ".join(n.label() for n in self) + "}"


# ---------------------------------------------------------------------------
# Bit and color utilities


def bit(i: int, j: int) -> int:
    """j-th bit of i (LSB at j=0); negative positions read as 0."""
    if j < 0:
        return 0
    return (i >> j) & 1


def color(i: int, j: int) -> int:
    """Color bit of element (i, j): bit(i,j) XOR bit(i,j-1); 0 is dark."""
    return bit(i, j) ^ bit(i, j - 1)


def reflect_row(i: int, j: int) -> int:
    """Row paired with i across the order-j butterfly: flips bits 0..j-1."""
    return i ^ ((1 << j) - 1)


def _check_coord(params: CodeParams, i: int, j: int) -> None:
    if not 0 <= i < params.rows:
        raise ValueError(f"row {i} out of range [0, {params.rows})")
    if not 0 <= j < params.k:
        raise ValueError(f"column {j} out of range [0, {params.k})")


def dark_rows(params: CodeParams, j: int) -> tuple[int, ...]:
    """Rows whose element in column j is dark, ascending."""
    _check_coord(params, 0, j)
    return tuple(i for i in range(params.rows) if color(i, j) == DARK)


# ---------------------------------------------------------------------------
# Parity sets

ParitySet = tuple[Coord, ...]


def local_set(params: CodeParams, i: int, j: int) -> ParitySet:
    """Elements that (i, j) contributes alongside itself.

    A white element stands alone; a dark element drags in the floor(k/2)
    columns cyclically to its right (the window j, j-1, ..., j-floor(k/2)).
    Coordinates are returned in (row, col) order.
    """
    _check_coord(params, i, j)
    if color(i, j) == WHITE:
        return (Coord(i, j),)
    k = params.k
    cols = sorted((j - d) % k for d in range(k // 2 + 1))
    return tuple(Coord(i, c) for c in cols)


def butterfly_set(params: CodeParams, i: int) -> ParitySet:
    """All information elements XORed into butterfly parity element i.

    Union over columns j of the local set anchored at (reflect_row(i, j), j);
    the constituents live on distinct rows, so the union is disjoint.
    Includes virtual-column coordinates; callers that care about storage
    drop columns >= k_user.
    """
    _check_coord(params, i, 0)
    seen: set[Coord] = set()
    for j in range(params.k):
        part = local_set(params, reflect_row(i, j), j)
        overlap = seen.intersection(part)
        assert not overlap, f"butterfly set union not disjoint at {overlap}"
        seen.update(part)
    return tuple(sorted(seen))


def update_parity_coords(params: CodeParams, c: Coord) -> frozenset[tuple[str, int]]:
    """Parity elements that change when information element c changes.

    Always the horizontal element of c's row, the butterfly element whose
    line contains c, and one more butterfly element per dark element of
    c's row within the floor(k/2)-column window to c's left.
    """
    _check_coord(params, c.row, c.col)
    k = params.k
    touched: set[tuple[str, int]] = {("h", c.row)}
    for jp in range(k):
        if (jp - c.col) % k <= k // 2 and (jp == c.col or color(c.row, jp) == DARK):
            touched.add(("b", reflect_row(c.row, jp)))
    return frozenset(touched)


# ---------------------------------------------------------------------------
# Stripe and encoding


@dataclass
class Stripe:
    """One codeword: data is rows x k x block_size (virtual column zero),
    h and b are the parity columns, rows x block_size each."""

    data: np.ndarray
    h: np.ndarray
    b: np.ndarray

    @classmethod
    def from_data(cls, params: CodeParams, data: np.ndarray) -> "Stripe":
        h, b = encode(params, data)
        return cls(data=data, h=h, b=b)

    @classmethod
    def zero(cls, params: CodeParams) -> "Stripe":
        rows, block = params.rows, params.block_size
        return cls(data=np.zeros((rows, params.k, block), dtype=np.uint8),
                   h=np.zeros((rows, block), dtype=np.uint8),
                   b=np.zeros((rows, block), dtype=np.uint8))


def stripes_equal(a: Stripe, b: Stripe) -> bool:
    return (np.array_equal(a.data, b.data) and np.array_equal(a.h, b.h)
            and np.array_equal(a.b, b.b))


@functools.lru_cache(maxsize=None)
def _butterfly_plan(params: CodeParams) -> tuple[np.ndarray, np.ndarray]:
    """Flat gather indices and segment starts for the butterfly column.

    Virtual-column coordinates are dropped; they are identically zero.
    """
    idx: list[int] = []
    starts = [0]
    for i in range(params.rows):
        for r, c in butterfly_set(params, i):
            if not is_virtual_col(params, c):
                idx.append(r * params.k + c)
        starts.append(len(idx))
    return (np.asarray(idx, dtype=np.int64), np.asarray(starts, dtype=np.int64))


def _check_data(params: CodeParams, data: np.ndarray) -> None:
    want = (params.rows, params.k, params.block_size)
    if data.shape != want:
        raise ValueError(f"data shape {data.shape} does not match {want}")
    if data.dtype != np.uint8:
        raise ValueError(f"data must be uint8, got {data.dtype}")


def encode(params: CodeParams, data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Compute the horizontal and butterfly parity columns for a data array.

    h_i is the XOR of row i across all columns; b_i is the XOR over the
    butterfly set of row i.  XOR is applied octet-wise across blocks.
    """
    _check_data(params, data)
    data = np.ascontiguousarray(data)
    h = np.bitwise_xor.reduce(data, axis=1)
    idx, starts = _butterfly_plan(params)
    b = np.empty((params.rows, params.block_size), dtype=np.uint8)
    kernels.gather_xor(data.reshape(-1, params.block_size), idx, starts, b)
    return h, b


# ---------------------------------------------------------------------------
# Single-node repair


@dataclass(frozen=True)
class RepairEquation:
    """target = parity element XOR all terms (stored info elements only)."""

    target: Coord
    parity: tuple[str, int]
    terms: tuple[Coord, ...]
    method: str  # "horizontal" or "butterfly"


@dataclass(frozen=True)
class RepairPlan:
    """Rows to read from each surviving node and the order of recovery."""

    failed: NodeId
    reads: Mapping[NodeId, tuple[int, ...]]
    decode_order: tuple[tuple[Coord, str], ...]


def single_repair_equations(params: CodeParams, j: int) -> tuple[RepairEquation, ...]:
    """Recovery equations for information column j, dark rows first.

    Dark rows use the horizontal parity of their own row; white rows use the
    butterfly line through them, whose only unknowns besides the target are
    dark elements of column j recovered by the earlier equations.
    """
    if not 0 <= j < params.k_user:
        raise ValueError(f"column {j} is not a stored information column")
    eqs: list[RepairEquation] = []
    for i in range(params.rows):
        if color(i, j) == DARK:
            terms = tuple(Coord(i, jp) for jp in range(params.k)
                          if jp != j and not is_virtual_col(params, jp))
            eqs.append(RepairEquation(Coord(i, j), ("h", i), terms, "horizontal"))
    for i in range(params.rows):
        if color(i, j) == WHITE:
            line = reflect_row(i, j)
            terms = tuple(c for c in butterfly_set(params, line)
                          if c != Coord(i, j) and not is_virtual_col(params, c.col))
            eqs.append(RepairEquation(Coord(i, j), ("b", line), terms, "butterfly"))
    return tuple(eqs)


def single_repair_plan(params: CodeParams, failed: NodeId) -> RepairPlan:
    """Read plan for repairing one information node.

    Every surviving stored node contributes exactly half its rows: the dark
    rows of the failed column from the info and horizontal nodes, and the
    reflected white rows from the butterfly node.  Parity nodes have no
    partial plan (their repair re-reads everything); asking for one raises.
    """
    if not failed.is_info:
        raise ValueError("parity nodes are repaired by re-encoding; "
                         "no partial-read plan exists")
    check_node(params, failed)
    j = failed.index
    dark = dark_rows(params, j)
    butterfly_reads = tuple(sorted(reflect_row(i, j) for i in range(params.rows)
                                   if color(i, j) == WHITE))
    reads: dict[NodeId, tuple[int, ...]] = {}
    for jp in range(params.k_user):
        if jp != j:
            reads[info_node(jp)] = dark
    reads[HORIZONTAL] = dark
    reads[BUTTERFLY] = butterfly_reads
    order = tuple((eq.target, eq.method)
                  for eq in single_repair_equations(params, j))
    return RepairPlan(failed=failed, reads=reads, decode_order=order)


RowBlocks = Mapping[int, np.ndarray]


def _fetch(available: Mapping[NodeId, RowBlocks], node: NodeId, row: int) -> np.ndarray:
    try:
        return available[node][row]
    except KeyError:
        raise MissingElementError(
            f"repair needs row {row} of node {node.label()}") from None


def repair_node(params: CodeParams, failed: NodeId,
                available: Mapping[NodeId, RowBlocks]) -> np.ndarray:
    """Rebuild one node's column from the elements named by its plan.

    For an information node, `available` must hold at least the rows listed
    by single_repair_plan; for a parity node it must hold every row of every
    information column.  Returns the recovered column, rows x block_size.
    """
    check_node(params, failed)
    rows, block = params.rows, params.block_size
    col = np.zeros((rows, block), dtype=np.uint8)

    if not failed.is_info:
        data = np.zeros((rows, params.k, block), dtype=np.uint8)
        for jp in range(params.k_user):
            node = info_node(jp)
            for i in range(rows):
                data[i, jp] = _fetch(available, node, i)
        h, b = encode(params, data)
        return h if failed == HORIZONTAL else b

    recovered: dict[int, np.ndarray] = {}
    parity_node = {"h": HORIZONTAL, "b": BUTTERFLY}
    for eq in single_repair_equations(params, failed.index):
        kind, prow = eq.parity
        acc = np.array(_fetch(available, parity_node[kind], prow), dtype=np.uint8)
        for r, c in eq.terms:
            if c == failed.index:
                # dark element of the failed column, recovered above
                assert r in recovered, f"white row {eq.target.row} needs dark row {r}"
                acc ^= recovered[r]
            else:
                acc ^= _fetch(available, info_node(c), r)
        recovered[eq.target.row] = acc
        col[eq.target.row] = acc
    return col


def plan_reads(params: CodeParams, stripe: Stripe,
               plan: RepairPlan) -> dict[NodeId, dict[int, np.ndarray]]:
    """Extract exactly the elements a plan asks for from an in-memory stripe."""
    out: dict[NodeId, dict[int, np.ndarray]] = {}
    columns = {HORIZONTAL: stripe.h, BUTTERFLY: stripe.b}
    for node, rows in plan.reads.items():
        src = columns.get(node)
        if src is None:
            src = stripe.data[:, node.index]
        out[node] = {i: src[i] for i in rows}
    return out


def full_reads(params: CodeParams, stripe: Stripe,
               skip: NodeId) -> dict[NodeId, dict[int, np.ndarray]]:
    """All rows of every stored node except `skip` (parity-repair input)."""
    out: dict[NodeId, dict[int, np.ndarray]] = {}
    for node in all_nodes(params):
        if node == skip:
            continue
        src = (stripe.h if node == HORIZONTAL
               else stripe.b if node == BUTTERFLY
               else stripe.data[:, node.index])
        out[node] = {i: src[i] for i in range(params.rows)}
    return out


# ---------------------------------------------------------------------------
# Decode-iteration row indexing


def orient_columns(params: CodeParams, ja: int, jb: int) -> tuple[int, int]:
    """Order a column pair so the forward cyclic distance is <= floor(k/2).

    k odd makes the two cyclic distances differ, so the orientation is
    unique.
    """
    _check_coord(params, 0, ja)
    _check_coord(params, 0, jb)
    if ja == jb:
        raise ValueError("column pair must be distinct")
    if (jb - ja) % params.k <= params.k // 2:
        return ja, jb
    return jb, ja


def _row_from_colors(k: int, colors: list[int]) -> int:
    # A row's bits are the prefix-XOR of its color bits; the top bit must
    # come out zero because the colors of any row XOR to zero.
    row = 0
    acc = 0
    for c in range(k - 1):
        acc ^= colors[c]
        row |= acc << c
    assert acc ^ colors[k - 1] == 0, "color pattern does not XOR to zero"
    return row


def iteration_row(params: CodeParams, t: int, j: int) -> int:
    """Row decoded at iteration t when column j and the horizontal node fail.

    The surviving columns' color bits, read in ascending column order, spell
    t (dark=0, white=1); the color at j is forced by parity.  The map t -> row
    is a bijection on [2^(k-1)].
    """
    _check_coord(params, 0, j)
    if not 0 <= t < params.rows:
        raise ValueError(f"iteration {t} out of range [0, {params.rows})")
    k = params.k
    colors = [0] * k
    for m, c in enumerate(cc for cc in range(k) if cc != j):
        colors[c] = bit(t, m)
    colors[j] = 0
    for c in range(k):
        if c != j:
            colors[j] ^= colors[c]
    return _row_from_colors(k, colors)


def iteration_row_pair(params: CodeParams, t: int, j0: int, j1: int) -> tuple[int, int]:
    """Row pair decoded at iteration t when columns j0 and j1 fail.

    (j0, j1) must be oriented as by orient_columns.  Both rows spell t in
    the colors of the other columns; i0 is the one dark at j1, and
    i1 = i0 XOR (2^j1 - 1) XOR (2^j0 - 1).  Over all t the pairs partition
    the rows.
    """
    if orient_columns(params, j0, j1) != (j0, j1):
        raise ValueError(f"columns ({j0}, {j1}) are not oriented; "
                         f"use orient_columns first")
    if not 0 <= t < params.rows // 2:
        raise ValueError(f"iteration {t} out of range [0, {params.rows // 2})")
    k = params.k
    colors = [0] * k
    for m, c in enumerate(cc for cc in range(k) if cc not in (j0, j1)):
        colors[c] = bit(t, m)
    colors[j1] = DARK
    colors[j0] = 0
    for c in range(k):
        if c != j0:
            colors[j0] ^= colors[c]
    i0 = _row_from_colors(k, colors)
    i1 = i0 ^ ((1 << j1) - 1) ^ ((1 << j0) - 1)
    return i0, i1


# ---------------------------------------------------------------------------
# Double-erasure decoding


def _assert_dependency_order(done_iter: np.ndarray, row: int, t: int) -> None:
    # Cross-row dependencies must come from an earlier iteration whose index
    # differs from t in exactly one bit, and that bit is set in t.
    dep_t = int(done_iter[row])
    assert dep_t >= 0, f"row {row} consumed before it was decoded"
    diff = dep_t ^ t
    assert dep_t < t and diff & (diff - 1) == 0 and t & diff, (
        f"row {row} decoded at iteration {dep_t}, consumed at {t}")


def _column_from_horizontal(params: CodeParams, data: np.ndarray,
                            h: np.ndarray, j: int) -> None:
    acc = h.copy()
    for c in range(params.k):
        if c != j:
            acc ^= data[:, c]
    data[:, j] = acc


def _decode_info_without_horizontal(params: CodeParams, data: np.ndarray,
                                    b: np.ndarray, j: int) -> None:
    rows = params.rows
    done_iter = np.full(rows, -1, dtype=np.int64)
    for t in range(rows):
        i = iteration_row(params, t, j)
        line = reflect_row(i, j)
        acc = b[line].copy()
        for r, c in butterfly_set(params, line):
            if (r, c) == (i, j):
                continue
            if c == j:
                _assert_dependency_order(done_iter, r, t)
            acc ^= data[r, c]
        data[i, j] = acc
        done_iter[i] = t


def _decode_two_info(params: CodeParams, data: np.ndarray, h: np.ndarray,
                     b: np.ndarray, j0: int, j1: int) -> None:
    rows, k = params.rows, params.k
    done_iter = np.full(rows, -1, dtype=np.int64)
    for t in range(rows // 2):
        i0, i1 = iteration_row_pair(params, t, j0, j1)
        pair = (i0, i1)

        # First unknown of the pair: combine the horizontal parity of i0
        # with the butterfly line shared by (i1, j0) and (i0, j1).
        acc = h[i0].copy()
        for c in range(k):
            if c not in (j0, j1):
                acc ^= data[i0, c]
        line = reflect_row(i1, j0)
        acc ^= b[line]
        skip = {Coord(i1, j0), Coord(i0, j0), Coord(i0, j1)}
        for r, c in butterfly_set(params, line):
            if Coord(r, c) in skip:
                continue
            if c in (j0, j1) and r not in pair:
                _assert_dependency_order(done_iter, r, t)
            acc ^= data[r, c]
        data[i1, j0] = acc

        # Row i1 is now short only its j1 element: horizontal parity closes it.
        _row_from_h(data, h, k, i1, j1)

        # (i0, j0) from its butterfly line; the just-decoded (i1, j1) is a
        # known summand on that line.
        line = reflect_row(i0, j0)
        acc = b[line].copy()
        for r, c in butterfly_set(params, line):
            if (r, c) == (i0, j0):
                continue
            if c in (j0, j1) and r not in pair:
                _assert_dependency_order(done_iter, r, t)
            acc ^= data[r, c]
        data[i0, j0] = acc

        # Row i0 closes with its horizontal parity.
        _row_from_h(data, h, k, i0, j1)

        done_iter[i0] = t
        done_iter[i1] = t


def _row_from_h(data: np.ndarray, h: np.ndarray, k: int, i: int, j: int) -> None:
    acc = h[i].copy()
    for c in range(k):
        if c != j:
            acc ^= data[i, c]
    data[i, j] = acc


def _require_column(params: CodeParams, available: Mapping[NodeId, np.ndarray],
                    node: NodeId) -> np.ndarray:
    try:
        arr = available[node]
    except KeyError:
        raise MissingElementError(
            f"node {node.label()} is not in the erasure pattern but was not"
            " supplied") from None
    want = (params.rows, params.block_size)
    if arr.shape != want:
        raise ValueError(f"column for {node.label()} has shape {arr.shape},"
                         f" expected {want}")
    return arr


def decode_erasures(params: CodeParams, pattern: ErasurePattern,
                    available: Mapping[NodeId, np.ndarray]) -> Stripe:
    """Rebuild a full stripe with up to two nodes missing.

    `available` maps every surviving stored node to its full column
    (rows x block_size); nodes in the pattern must be absent.  Dispatch:
    both parities re-encode; butterfly+info recovers the column row-wise
    from the horizontal parity then re-encodes the butterfly; horizontal+info
    walks the butterfly lines in iteration order; two info columns recover
    four elements per iteration, two per row pair.
    """
    for node in pattern:
        check_node(params, node)
        if node in available:
            raise ValueError(f"node {node.label()} is listed as failed but"
                             " was supplied")
    rows, k, block = params.rows, params.k, params.block_size

    data = np.zeros((rows, k, block), dtype=np.uint8)
    for jp in range(params.k_user):
        node = info_node(jp)
        if node not in pattern:
            data[:, jp] = _require_column(params, available, node)
    h_missing = HORIZONTAL in pattern
    b_missing = BUTTERFLY in pattern
    h = (np.zeros((rows, block), np.uint8) if h_missing
         else _require_column(params, available, HORIZONTAL).copy())
    b = (np.zeros((rows, block), np.uint8) if b_missing
         else _require_column(params, available, BUTTERFLY).copy())

    lost_cols = sorted(n.index for n in pattern if n.is_info)

    if len(lost_cols) == 2:
        j0, j1 = orient_columns(params, *lost_cols)
        _decode_two_info(params, data, h, b, j0, j1)
    elif len(lost_cols) == 1:
        j = lost_cols[0]
        if h_missing:
            _decode_info_without_horizontal(params, data, b, j)
        else:
            _column_from_horizontal(params, data, h, j)

    if h_missing or b_missing:
        h2, b2 = encode(params, data)
        if h_missing:
            h = h2
        if b_missing:
            b = b2
    return Stripe(data=data, h=h, b=b)

"""Shard files and manifests: mapping byte streams onto stripes and disk.

One shard file per node spans all stripes (column-major), so a single-node
repair reads a contiguous half-column per stripe.  Every shard starts with a
fixed little-endian header; a text manifest sidecar records the geometry and
a 64-bit digest per shard.

Stripe payload layout: a stripe holds k_user*rows*block_size octets of user
data, column-major (column j occupies the j-th contiguous rows*block_size
slice, rows in order).  The last stripe is zero-padded; the manifest's
original_length trims it on reassembly.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    BUTTERFLY,
    HORIZONTAL,
    CodeParams,
    ErasurePattern,
    NodeId,
    Stripe,
    all_nodes,
    check_node,
    decode_erasures,
    encode,
    info_node,
    node_sort_key,
    repair_node,
    single_repair_plan,
)
from .errors import FormatError, UnrecoverableLossError

MAGIC = b"BFLY"
FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.txt"
MANIFEST_FORMAT = "bfly-manifest/1"
DIGEST_ALGORITHM = "blake2b-64"

NODE_TAG_HORIZONTAL = 0xFFFE
NODE_TAG_BUTTERFLY = 0xFFFF

_HEADER = struct.Struct("<4sHHIHQQ")
HEADER_SIZE = _HEADER.size


def node_tag(node: NodeId) -> int:
    if node == HORIZONTAL:
        return NODE_TAG_HORIZONTAL
    if node == BUTTERFLY:
        return NODE_TAG_BUTTERFLY
    return node.index


def node_from_tag(tag: int, k_user: int) -> NodeId:
    if tag == NODE_TAG_HORIZONTAL:
        return HORIZONTAL
    if tag == NODE_TAG_BUTTERFLY:
        return BUTTERFLY
    if 0 <= tag < k_user:
        return info_node(tag)
    raise FormatError(f"shard node tag {tag:#06x} invalid for k_user={k_user}")


def shard_filename(node: NodeId) -> str:
    return f"{node.label()}.shard"


@dataclass(frozen=True)
class ShardHeader:
    """Fixed 30-octet little-endian shard preamble."""

    k_user: int
    block_size: int
    node: NodeId
    stripe_count: int
    original_length: int

    def pack(self) -> bytes:
        return _HEADER.pack(MAGIC, FORMAT_VERSION, self.k_user, self.block_size,
                            node_tag(self.node), self.stripe_count,
                            self.original_length)

    @classmethod
    def unpack(cls, buf: bytes) -> "ShardHeader":
        if len(buf) < HEADER_SIZE:
            raise FormatError("shard file shorter than its header")
        magic, version, k_user, block_size, tag, stripes, length = \
            _HEADER.unpack_from(buf)
        if magic != MAGIC:
            raise FormatError(f"bad shard magic {magic!r}")
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported shard format version {version}")
        return cls(k_user=k_user, block_size=block_size,
                   node=node_from_tag(tag, k_user), stripe_count=stripes,
                   original_length=length)


def digest64(data: bytes) -> str:
    """64-bit integrity checksum, hex encoded (not a security boundary)."""
    return hashlib.blake2b(data, digest_size=8).hexdigest()


@dataclass(frozen=True)
class Manifest:
    """Sidecar describing one encoded file: geometry, length, shard digests."""

    k_user: int
    block_size: int
    stripe_count: int
    original_length: int
    original_name: str
    digests: dict[str, str]  # shard label -> 64-bit digest hex

    @property
    def params(self) -> CodeParams:
        return CodeParams(self.k_user, block_size=self.block_size)

    def to_text(self) -> str:
        lines = [
            f"format = {MANIFEST_FORMAT}",
            f"k_user = {self.k_user}",
            f"block_size = {self.block_size}",
            f"stripe_count = {self.stripe_count}",
            f"original_length = {self.original_length}",
            f"original_name = {self.original_name}",
            f"digest_algorithm = {DIGEST_ALGORITHM}",
        ]
        for label in sorted(self.digests):
            lines.append(f"shard.{label}.digest = {self.digests[label]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Manifest":
        kv: dict[str, str] = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise FormatError(f"manifest line not key = value: {line!r}")
            kv[key.strip()] = value.strip()
        if kv.get("format") != MANIFEST_FORMAT:
            raise FormatError(f"unsupported manifest format {kv.get('format')!r}")
        if kv.get("digest_algorithm") != DIGEST_ALGORITHM:
            raise FormatError(
                f"unsupported digest algorithm {kv.get('digest_algorithm')!r}")
        digests = {}
        for key, value in kv.items():
            if key.startswith("shard.") and key.endswith(".digest"):
                digests[key[len("shard."):-len(".digest")]] = value
        try:
            return cls(k_user=int(kv["k_user"]),
                       block_size=int(kv["block_size"]),
                       stripe_count=int(kv["stripe_count"]),
                       original_length=int(kv["original_length"]),
                       original_name=kv.get("original_name", ""),
                       digests=digests)
        except KeyError as exc:
            raise FormatError(f"manifest missing key {exc}") from None


def stripe_payload_size(params: CodeParams) -> int:
    return params.k_user * params.rows * params.block_size


def chunk_file(data: bytes, params: CodeParams) -> list[Stripe]:
    """Split a byte stream into encoded stripes (last one zero-padded).

    Empty input yields zero stripes.
    """
    payload = stripe_payload_size(params)
    stripes: list[Stripe] = []
    for off in range(0, len(data), payload):
        piece = data[off:off + payload]
        if len(piece) < payload:
            piece = piece + b"\x00" * (payload - len(piece))
        cols = np.frombuffer(piece, dtype=np.uint8).reshape(
            params.k_user, params.rows, params.block_size)
        full = np.zeros((params.rows, params.k, params.block_size), dtype=np.uint8)
        full[:, :params.k_user] = cols.transpose(1, 0, 2)
        stripes.append(Stripe.from_data(params, full))
    return stripes


def assemble_file(stripes_data: np.ndarray, params: CodeParams,
                  original_length: int) -> bytes:
    """Inverse of chunk_file given the information region of every stripe.

    `stripes_data` is (stripe_count, rows, k_user, block_size).
    """
    parts = [s.transpose(1, 0, 2).tobytes() for s in stripes_data]
    return b"".join(parts)[:original_length]


def _node_column_bytes(stripe: Stripe, node: NodeId) -> bytes:
    if node == HORIZONTAL:
        return stripe.h.tobytes()
    if node == BUTTERFLY:
        return stripe.b.tobytes()
    return np.ascontiguousarray(stripe.data[:, node.index]).tobytes()


def write_shards(stripes: list[Stripe], params: CodeParams, directory: Path,
                 original_name: str, original_length: int) -> Manifest:
    """Write one shard file per stored node plus the manifest sidecar."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    digests: dict[str, str] = {}
    for node in all_nodes(params):
        hdr = ShardHeader(k_user=params.k_user, block_size=params.block_size,
                          node=node, stripe_count=len(stripes),
                          original_length=original_length)
        blob = hdr.pack() + b"".join(_node_column_bytes(s, node) for s in stripes)
        (directory / shard_filename(node)).write_bytes(blob)
        digests[node.label()] = digest64(blob)
    manifest = Manifest(k_user=params.k_user, block_size=params.block_size,
                        stripe_count=len(stripes),
                        original_length=original_length,
                        original_name=original_name, digests=digests)
    (directory / MANIFEST_NAME).write_text(manifest.to_text())
    return manifest


def read_manifest(directory: Path) -> Manifest:
    path = Path(directory) / MANIFEST_NAME
    if not path.exists():
        raise FormatError(f"no manifest at {path}")
    return Manifest.from_text(path.read_text())


def _check_shard(manifest: Manifest, node: NodeId, blob: bytes) -> None:
    label = node.label()
    want = manifest.digests.get(label)
    if want is None:
        raise FormatError(f"manifest lists no digest for shard {label}")
    if digest64(blob) != want:
        raise FormatError(f"digest mismatch for shard {label}")
    hdr = ShardHeader.unpack(blob)
    if (hdr.k_user, hdr.block_size, hdr.stripe_count, hdr.original_length) != \
            (manifest.k_user, manifest.block_size, manifest.stripe_count,
             manifest.original_length):
        raise FormatError(f"shard {label} header disagrees with manifest")
    if hdr.node != node:
        raise FormatError(f"shard {label} carries node tag {hdr.node.label()}")
    want_len = HEADER_SIZE + (manifest.stripe_count * manifest.params.rows
                              * manifest.block_size)
    if len(blob) != want_len:
        raise FormatError(f"shard {label} is {len(blob)} octets, expected {want_len}")


def read_available(directory: Path) -> tuple[Manifest, dict[NodeId, np.ndarray],
                                             ErasurePattern]:
    """Load every present shard and report the missing ones as the pattern.

    Present shards are digest- and header-checked.  Returns columns shaped
    (stripe_count, rows, block_size) per node.  More than two missing shards
    raises UnrecoverableLossError.
    """
    directory = Path(directory)
    manifest = read_manifest(directory)
    params = manifest.params
    available: dict[NodeId, np.ndarray] = {}
    missing: list[NodeId] = []
    for node in all_nodes(params):
        path = directory / shard_filename(node)
        if not path.exists():
            missing.append(node)
            continue
        blob = path.read_bytes()
        _check_shard(manifest, node, blob)
        arr = np.frombuffer(blob, dtype=np.uint8, offset=HEADER_SIZE).reshape(
            manifest.stripe_count, params.rows, params.block_size)
        available[node] = arr
    if len(missing) > 2:
        raise UnrecoverableLossError(
            f"{len(missing)} shards missing ({', '.join(n.label() for n in missing)});"
            " at most 2 are recoverable")
    return manifest, available, ErasurePattern.of(*missing)


def decode_file(directory: Path) -> tuple[bytes, Manifest, ErasurePattern]:
    """Reconstruct the original byte stream from a shard directory."""
    manifest, available, pattern = read_available(directory)
    params = manifest.params
    rows, block = params.rows, params.block_size
    info_missing = any(n.is_info for n in pattern)
    out = np.empty((manifest.stripe_count, rows, params.k_user, block),
                   dtype=np.uint8)
    for s in range(manifest.stripe_count):
        if info_missing:
            per_stripe = {n: col[s] for n, col in available.items()}
            stripe = decode_erasures(params, pattern, per_stripe)
            out[s] = stripe.data[:, :params.k_user]
        else:
            for j in range(params.k_user):
                out[s, :, j] = available[info_node(j)][s]
    data = assemble_file(out, params, manifest.original_length)
    return data, manifest, pattern


@dataclass(frozen=True)
class RepairResult:
    """Outcome of rebuilding one missing shard from the others on disk."""

    node: NodeId
    params: CodeParams
    stripe_count: int
    bytes_read: dict[NodeId, int]
    shard_path: Path


def repair_missing_shard(directory: Path) -> RepairResult:
    """Rebuild the single missing shard, reading only what the plan names.

    For an information shard this seeks to exactly the half-column regions
    of every survivor; a parity shard re-reads the information shards in
    full.  The rebuilt file must match the manifest digest.
    """
    directory = Path(directory)
    manifest = read_manifest(directory)
    params = manifest.params
    rows, block = params.rows, params.block_size
    missing = [n for n in all_nodes(params)
               if not (directory / shard_filename(n)).exists()]
    if len(missing) != 1:
        raise ValueError(f"repair needs exactly 1 missing shard, found "
                         f"{len(missing)}")
    node = missing[0]
    check_node(params, node)

    handles = {}
    bytes_read: dict[NodeId, int] = {}
    try:
        for other in all_nodes(params):
            if other == node:
                continue
            handles[other] = open(directory / shard_filename(other), "rb")
            bytes_read[other] = 0

        def read_rows(src: NodeId, stripe_idx: int, which: list[int]) -> dict[int, np.ndarray]:
            fh = handles[src]
            base = HEADER_SIZE + stripe_idx * rows * block
            got: dict[int, np.ndarray] = {}
            for r in which:
                fh.seek(base + r * block)
                buf = fh.read(block)
                bytes_read[src] += len(buf)
                got[r] = np.frombuffer(buf, dtype=np.uint8)
            return got

        if node.is_info:
            plan = single_repair_plan(params, node)
            reads = {n: list(r) for n, r in plan.reads.items()}
        else:
            reads = {info_node(j): list(range(rows))
                     for j in range(params.k_user)}

        chunks: list[bytes] = []
        for s in range(manifest.stripe_count):
            available = {src: read_rows(src, s, which)
                         for src, which in reads.items()}
            column = repair_node(params, node, available)
            chunks.append(column.tobytes())
    finally:
        for fh in handles.values():
            fh.close()

    hdr = ShardHeader(k_user=params.k_user, block_size=block, node=node,
                      stripe_count=manifest.stripe_count,
                      original_length=manifest.original_length)
    blob = hdr.pack() + b"".join(chunks)
    if digest64(blob) != manifest.digests.get(node.label()):
        raise FormatError(f"rebuilt shard {node.label()} does not match the"
                          " manifest digest")
    path = directory / shard_filename(node)
    path.write_bytes(blob)
    return RepairResult(node=node, params=params,
                        stripe_count=manifest.stripe_count,
                        bytes_read=bytes_read, shard_path=path)


def xor_blocks(dst: np.ndarray, src: np.ndarray) -> np.ndarray:
    """Octet-wise XOR of src into dst (lengths must match)."""
    if dst.shape != src.shape:
        raise ValueError(f"block shape mismatch: {dst.shape} vs {src.shape}")
    np.bitwise_xor(dst, src, out=dst)
    return dst

"""Operator command line: encode, repair, decode, verify, stats, bench.

Exit codes: 0 success, 1 generic failure (including a failed verification),
2 unrecoverable loss (more than two shards missing), 3 format mismatch
(magic/version/digest/manifest), 4 I/O error, 5 wrong-state usage (e.g.
repair when zero or two shards are missing).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, bench, gf2, kernels, metrics, store
from .core import CodeParams, all_nodes, node_sort_key
from .errors import BflyError, FormatError, UnrecoverableLossError

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_UNRECOVERABLE = 2
EXIT_FORMAT = 3
EXIT_IO = 4
EXIT_STATE = 5

DEFAULT_K_USER = 4
DEFAULT_BLOCK_SIZE = 4096


class StateError(BflyError):
    """Command preconditions on the shard directory are not met."""


def _write_json(path: str | None, payload: dict) -> None:
    if path:
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def cmd_encode(args: argparse.Namespace) -> int:
    params = CodeParams(args.k, block_size=args.block_size)
    data = Path(args.file).read_bytes()
    stripes = store.chunk_file(data, params)
    manifest = store.write_shards(stripes, params, Path(args.dir),
                                  original_name=Path(args.file).name,
                                  original_length=len(data))
    print(f"encoded {len(data)} octets into {params.stored_nodes} shards "
          f"({manifest.stripe_count} stripes, k={params.k}, "
          f"rows={params.rows}, block={params.block_size})")
    print(f"shards + {store.MANIFEST_NAME} written to {args.dir}")
    return EXIT_OK


def cmd_repair(args: argparse.Namespace) -> int:
    directory = Path(args.dir)
    manifest = store.read_manifest(directory)
    params = manifest.params
    missing = [n for n in all_nodes(params)
               if not (directory / store.shard_filename(n)).exists()]
    if len(missing) == 0:
        raise StateError("no shard is missing; nothing to repair")
    if len(missing) > 2:
        raise UnrecoverableLossError(
            f"{len(missing)} shards missing; at most 2 are recoverable")
    if len(missing) == 2:
        raise StateError("two shards are missing; run decode to recover the file")

    result = store.repair_missing_shard(directory)
    report = metrics.measure_repair_access(params, result.node)
    print(f"rebuilt shard {result.node.label()} "
          f"({result.stripe_count} stripes), digest verified")
    print(report.to_text())
    for node in sorted(result.bytes_read, key=node_sort_key):
        expect = report.reads[node] * params.block_size * result.stripe_count
        got = result.bytes_read[node]
        marker = "" if got == expect else f"  (plan expected {expect})"
        print(f"  {got} octets read from {node.label()}{marker}")
    payload = report.to_dict()
    payload["bytes_read"] = {n.label(): c for n, c in result.bytes_read.items()}
    payload["stripe_count"] = result.stripe_count
    _write_json(args.json, payload)
    return EXIT_OK


def cmd_decode(args: argparse.Namespace) -> int:
    data, manifest, pattern = store.decode_file(Path(args.dir))
    Path(args.out).write_bytes(data)
    what = pattern.label() if len(pattern) else "none"
    print(f"decoded {len(data)} octets to {args.out} (missing shards: {what})")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    params = CodeParams(args.k)
    report = gf2.mds_verify(params)
    for pattern, ok in report.results:
        print(f"  {pattern.label()}: {'OK' if ok else 'FAIL'}")
    verdict = f"{report.n_pass}/{len(report.results)} patterns OK"
    print(verdict)
    if args.dump_generator:
        system = gf2.build_generator(params)
        Path(args.dump_generator).write_text(gf2.dump_generator(system) + "\n")
        print(f"generator grid written to {args.dump_generator}")
    _write_json(args.json, {
        "format_version": metrics.REPORT_FORMAT_VERSION,
        "report": "mds-verify",
        "k_user": params.k_user,
        "patterns": [{"nodes": [n.label() for n in pat], "ok": ok}
                     for pat, ok in report.results],
        "all_ok": report.all_pass,
    })
    return EXIT_OK if report.all_pass else EXIT_FAILURE


def cmd_stats(args: argparse.Namespace) -> int:
    params = CodeParams(args.k)
    if params.k > gf2.VERIFY_MAX_K:
        raise StateError(f"stats is desk-scale only (k <= {gf2.VERIFY_MAX_K})")
    update = metrics.measure_update(params)
    print(update.to_text())
    print("repair access ratios:")
    access_rows = []
    for node in all_nodes(params):
        rep = metrics.measure_repair_access(params, node)
        ratios = sorted(((n.label(), f"{r.numerator}/{r.denominator}"
                          if r.denominator != 1 else str(r.numerator))
                         for n, r in rep.ratios.items()))
        access_rows.append({"failed": node.label(), "ratios": dict(ratios)})
        summary = ", ".join(f"{lbl}={ratio}" for lbl, ratio in ratios)
        print(f"  {node.label()} fails -> {summary}")
    payload = update.to_dict()
    payload["access"] = access_rows
    _write_json(args.json, payload)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    results = bench.run_bench(k_user=args.k, block_size=args.block_size,
                              stripes=args.stripes, repeats=args.repeats)
    print(f"active backend: {kernels.BACKEND} (BFLY_KERNEL to override)")
    print(bench.format_bench(results))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bfly",
        description="Butterfly 2-parity XOR-only MDS array code.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="encode a file into shards")
    p.add_argument("file", help="input file")
    p.add_argument("--dir", required=True, help="output shard directory")
    p.add_argument("--k", type=int, default=DEFAULT_K_USER,
                   help="information columns (default %(default)s)")
    p.add_argument("--block-size", type=int, default=DEFAULT_BLOCK_SIZE,
                   help="octets per element (default %(default)s)")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("repair", help="rebuild the single missing shard")
    p.add_argument("--dir", required=True, help="shard directory")
    p.add_argument("--json", help="write the access report to this file")
    p.set_defaults(func=cmd_repair)

    p = sub.add_parser("decode", help="reconstruct the original file")
    p.add_argument("--dir", required=True, help="shard directory")
    p.add_argument("--out", required=True, help="output file")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("verify", help="rank-certify all 2-node losses")
    p.add_argument("--k", type=int, default=DEFAULT_K_USER,
                   help="information columns (default %(default)s)")
    p.add_argument("--json", help="write the pattern report to this file")
    p.add_argument("--dump-generator", metavar="FILE",
                   help="write the generator matrix as a 0/1 text grid")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("stats", help="print update-measure and access tables")
    p.add_argument("--k", type=int, default=DEFAULT_K_USER,
                   help="information columns (default %(default)s)")
    p.add_argument("--json", help="write the reports to this file")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("bench", help="compare XOR kernel backends")
    p.add_argument("--k", type=int, default=DEFAULT_K_USER)
    p.add_argument("--block-size", type=int, default=DEFAULT_BLOCK_SIZE)
    p.add_argument("--stripes", type=int, default=64)
    p.add_argument("--repeats", type=int, default=5)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UnrecoverableLossError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNRECOVERABLE
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except StateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STATE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (BflyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point.

Data goes to stdout, diagnostics to stderr.  Exit codes: 1 usage or bench
disagreement, 2 parse/validation failure, 3 deadlock, 4 method inapplicable,
5 resource limit.
"""
from __future__ import annotations

import argparse
import json
import os
import random
import sys

from . import bench as bench_mod
from . import oracle
from .ctg import (
    DeadlockedGraphError, build_ctg, has_deadlock, to_dot,
)
from .decompose import count_executions, decompose, tree_to_json_text
from .process import (
    Act, New, Par, ProcessError, Stop, Sync, Term,
    format_process, parse_process, size, validate,
)
from .sample import sample_execution
from .subclasses import (
    InvalidParametersError, NotForkJoinError, NotPromiseError,
    fj_count, fj_sample, gen_arch, gen_fork_join, is_arch, is_fork_join,
    is_promise_process, sp_tree,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVALID = 2
EXIT_DEADLOCK = 3
EXIT_INAPPLICABLE = 4
EXIT_RESOURCE = 5


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); we reserve 2
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="bsync", description=__doc__)
    parser.add_argument("--threads", type=int,
                        default=int(os.environ.get("BSYNC_THREADS", "1")),
                        help="cap on internal worker parallelism")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse a process file and report")
    p.add_argument("file")
    p.add_argument("--auto-rename", action="store_true",
                   help="rewrite duplicate labels instead of failing")

    p = sub.add_parser("ctg", help="control graph and deadlock verdict")
    p.add_argument("file")
    p.add_argument("--dot", metavar="OUT", help="write DOT to this path")

    p = sub.add_parser("count", help="exact number of executions")
    p.add_argument("file")
    p.add_argument("--method", choices=bench_mod.COUNT_METHODS,
                   default="bits")

    p = sub.add_parser("sample", help="uniform random executions")
    p.add_argument("file")
    p.add_argument("--method", choices=bench_mod.SAMPLE_METHODS,
                   default="bits")
    p.add_argument("--count", type=int, default=1, dest="draws")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.add_argument("--burn-in", type=int, default=2000)
    p.add_argument("--steps-between", type=int, default=50)

    p = sub.add_parser("classify", help="subclass membership")
    p.add_argument("file")

    p = sub.add_parser("gen", help="generate a random instance")
    p.add_argument("--class", dest="cls", choices=("fj", "arch"),
                   required=True)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--promises", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("formula", help="decomposition formula as JSON")
    p.add_argument("file")

    p = sub.add_parser("bench", help="run a benchmark spec")
    p.add_argument("spec")
    p.add_argument("--out", metavar="REPORT", help="write JSON report here")

    return parser


def _load_term(path: str) -> Term:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return validate(parse_process(text)).term


def _dump_ast(term: Term, indent: int = 0) -> list[str]:
    pad = "  " * indent
    if isinstance(term, Stop):
        return [f"{pad}stop"]
    if isinstance(term, Act):
        return [f"{pad}act {term.label}"] + _dump_ast(term.cont, indent + 1)
    if isinstance(term, Sync):
        return [f"{pad}sync {term.barrier}"] + _dump_ast(term.cont, indent + 1)
    if isinstance(term, New):
        return [f"{pad}new {term.barrier}"] + _dump_ast(term.body, indent + 1)
    lines = [f"{pad}par"]
    lines += _dump_ast(term.left, indent + 1)
    lines += _dump_ast(term.right, indent + 1)
    return lines


def run(argv: list[str]) -> int:
    sys.set_int_max_str_digits(2_000_000)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"bsync: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        return _dispatch(args)
    except ProcessError as exc:
        print(f"bsync: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as exc:
        print(f"bsync: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except DeadlockedGraphError as exc:
        print(f"bsync: {exc}", file=sys.stderr)
        return EXIT_DEADLOCK
    except (NotForkJoinError, NotPromiseError) as exc:
        print(f"bsync: method not applicable: {exc}", file=sys.stderr)
        return EXIT_INAPPLICABLE
    except InvalidParametersError as exc:
        print(f"bsync: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (oracle.TooLargeError, MemoryError) as exc:
        print(f"bsync: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


def _deadlock_message(g) -> str:
    from .ctg import BarrierNode
    names = sorted({v.name for v in g.vertices if isinstance(v, BarrierNode)})
    names += sorted({x.name for x, _ in g.edges if isinstance(x, BarrierNode)})
    if names:
        return f"deadlock: barrier {names[0]} cannot be discharged"
    return "deadlock: cyclic causal constraints"


def _dispatch(args) -> int:
    cmd = args.command

    if cmd == "parse":
        with open(args.file, "r", encoding="utf-8") as fh:
            text = fh.read()
        report = validate(parse_process(text), auto_rename=args.auto_rename)
        print("\n".join(_dump_ast(report.term)))
        print(f"actions: {len(report.labels)}")
        print("labels:", " ".join(report.labels))
        if report.renamed:
            print("renamed:", " ".join(f"{a}->{b}" for a, b in report.renamed))
        if report.unused_barriers:
            print("unused barriers:", " ".join(report.unused_barriers))
        return EXIT_OK

    if cmd == "ctg":
        term = _load_term(args.file)
        g = build_ctg(term)
        if args.dot:
            with open(args.dot, "w", encoding="utf-8") as fh:
                fh.write(to_dot(g))
        for v in g.sorted_vertices():
            print(v)
        for x, y in sorted(g.edges, key=lambda e: (str(e[0]), str(e[1]))):
            print(f"{x} -> {y}")
        if has_deadlock(g):
            print(f"bsync: {_deadlock_message(g)}", file=sys.stderr)
            return EXIT_DEADLOCK
        return EXIT_OK

    if cmd == "count":
        term = _load_term(args.file)
        if args.method == "fj":
            print(fj_count(sp_tree(term)))
            return EXIT_OK
        g = build_ctg(term)
        if has_deadlock(g):
            print(f"bsync: {_deadlock_message(g)}", file=sys.stderr)
            return EXIT_DEADLOCK
        if args.method == "bits":
            print(count_executions(g))
        else:
            print(len(oracle.brute_force_extensions(g)))
        return EXIT_OK

    if cmd == "sample":
        term = _load_term(args.file)
        if args.method == "fj":
            shape = sp_tree(term)
            rng = random.Random(args.seed)
            runs = [fj_sample(shape, rng) for _ in range(args.draws)]
        else:
            g = build_ctg(term)
            if has_deadlock(g):
                print(f"bsync: {_deadlock_message(g)}", file=sys.stderr)
                return EXIT_DEADLOCK
            if args.method == "bits":
                runs = sample_execution(g, args.draws, args.seed)
            elif args.method == "bruteforce":
                runs = oracle.brute_force_sampler(g, args.draws, args.seed)
            else:
                runs = oracle.mcmc_sampler(g, args.draws,
                                           burn_in=args.burn_in,
                                           steps_between=args.steps_between,
                                           seed=args.seed)
        if args.json:
            print(json.dumps([list(r) for r in runs]))
        else:
            for r in runs:
                print(" ".join(str(a) for a in r))
        return EXIT_OK

    if cmd == "classify":
        term = _load_term(args.file)
        g = build_ctg(term)
        deadlocked = has_deadlock(g)
        fj = is_fork_join(term)
        promise = is_promise_process(term)
        arch = is_arch(term) if promise else False
        print(f"size: {size(term)}")
        print(f"deadlock: {'yes' if deadlocked else 'no'}")
        print(f"fork_join: {'yes' if fj else 'no'}")
        print(f"promise: {'yes' if promise else 'no'}")
        print(f"arch: {'yes' if arch else 'no'}")
        if deadlocked:
            print("bit_decomposable: n/a")
            print(f"bsync: {_deadlock_message(g)}", file=sys.stderr)
            return EXIT_DEADLOCK
        from .decompose import is_bit_decomposable
        print(f"bit_decomposable: "
              f"{'yes' if is_bit_decomposable(g) else 'no'}")
        return EXIT_OK

    if cmd == "gen":
        if args.cls == "fj":
            term = gen_fork_join(args.size, args.seed)
        else:
            term = gen_arch(args.size, args.promises, args.seed)
        print(format_process(term))
        return EXIT_OK

    if cmd == "formula":
        term = _load_term(args.file)
        g = build_ctg(term)
        if has_deadlock(g):
            print(f"bsync: {_deadlock_message(g)}", file=sys.stderr)
            return EXIT_DEADLOCK
        print(tree_to_json_text(decompose(g), indent=2))
        return EXIT_OK

    if cmd == "bench":
        spec = bench_mod.BenchSpec.from_json_file(args.spec)
        report = bench_mod.bench_run(spec, max_workers=args.threads)
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(report.to_json_text())
        print(report.text_table(), end="")
        if not report.ok:
            print("bsync: cross-method count disagreement", file=sys.stderr)
            for d in report.disagreements:
                print(f"  {d['name']}: {d['counts']}", file=sys.stderr)
            return EXIT_USAGE
        return EXIT_OK

    raise AssertionError(f"unhandled command {cmd!r}")


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()

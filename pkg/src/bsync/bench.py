"""Benchmark harness: timed counting/sampling over generated instances.

A bench spec (JSON) lists instances, methods, seeds and a per-cell timeout;
every cell runs in its own forked worker so overruns can be killed without
poisoning the parent.  Counts surviving in more than one method are
cross-checked and any disagreement is reported (and makes the run fail).
"""
from __future__ import annotations

import json
import multiprocessing as mp
import random
import sys
import time
from dataclasses import dataclass, field
from typing import Any

from . import oracle
from .ctg import build_ctg, has_deadlock
from .decompose import count_executions
from .process import format_process, parse_process, size as term_size, validate
from .sample import sample_execution
from .subclasses import (
    NotForkJoinError, fj_count, fj_sample, gen_arch, gen_fork_join, sp_tree,
)

COUNT_METHODS = ("bits", "fj", "bruteforce")
SAMPLE_METHODS = ("bits", "fj", "bruteforce", "mcmc")


@dataclass
class SampleConfig:
    methods: tuple[str, ...] = ()
    draws: int = 1000
    seed: int = 0
    chi_square: bool = True
    burn_in: int = 2000
    steps_between: int = 50


@dataclass
class BenchSpec:
    instances: list[dict]
    count_methods: tuple[str, ...] = COUNT_METHODS
    sample: SampleConfig | None = None
    timeout_s: float = 30.0
    bruteforce_max_vertices: int = oracle.DEFAULT_MAX_VERTICES
    bruteforce_max_extensions: int = oracle.DEFAULT_MAX_EXTENSIONS

    @staticmethod
    def from_dict(data: dict) -> "BenchSpec":
        sample = None
        if "sample" in data and data["sample"]:
            s = data["sample"]
            sample = SampleConfig(
                methods=tuple(s.get("methods", ())),
                draws=int(s.get("draws", 1000)),
                seed=int(s.get("seed", 0)),
                chi_square=bool(s.get("chi_square", True)),
                burn_in=int(s.get("burn_in", 2000)),
                steps_between=int(s.get("steps_between", 50)),
            )
        spec = BenchSpec(
            instances=list(data["instances"]),
            count_methods=tuple(data.get("count_methods", COUNT_METHODS)),
            sample=sample,
            timeout_s=float(data.get("timeout_s", 30.0)),
            bruteforce_max_vertices=int(
                data.get("bruteforce_max_vertices", oracle.DEFAULT_MAX_VERTICES)),
            bruteforce_max_extensions=int(
                data.get("bruteforce_max_extensions", oracle.DEFAULT_MAX_EXTENSIONS)),
        )
        for m in spec.count_methods:
            if m not in COUNT_METHODS:
                raise ValueError(f"unknown count method {m!r}")
        if spec.sample:
            for m in spec.sample.methods:
                if m not in SAMPLE_METHODS:
                    raise ValueError(f"unknown sample method {m!r}")
        return spec

    @staticmethod
    def from_json_file(path: str) -> "BenchSpec":
        with open(path, "r", encoding="utf-8") as fh:
            return BenchSpec.from_dict(json.load(fh))


@dataclass
class BenchReport:
    rows: list[dict]
    disagreements: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.disagreements

    def to_dict(self) -> dict:
        return {"ok": self.ok, "rows": self.rows,
                "disagreements": self.disagreements}

    def to_json_text(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    def text_table(self) -> str:
        headers = ["instance", "n"]
        methods = sorted({m for row in self.rows for m in row["counts"]})
        smethods = sorted({m for row in self.rows for m in row["samples"]})
        headers += [f"count:{m}" for m in methods]
        headers += [f"sample:{m}" for m in smethods]
        headers.append("count")
        table = [headers]
        for row in self.rows:
            line = [row["name"], str(row["size"])]
            for m in methods:
                cell = row["counts"].get(m)
                line.append(_cell_text(cell))
            for m in smethods:
                cell = row["samples"].get(m)
                line.append(_sample_text(cell))
            line.append(row["count"] if row["count"] is not None else "?")
            table.append(line)
        widths = [max(len(r[i]) for r in table) for i in range(len(headers))]
        lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip()
                 for r in table]
        lines.insert(1, "-" * len(lines[0]))
        return "\n".join(lines) + "\n"


def _cell_text(cell: dict | None) -> str:
    if cell is None:
        return "-"
    if cell["status"] == "ok":
        return f"{cell['seconds']:.3g}s"
    return cell["status"]


def _sample_text(cell: dict | None) -> str:
    if cell is None:
        return "-"
    if cell["status"] != "ok":
        return cell["status"]
    text = f"{cell['seconds']:.3g}s"
    if cell.get("p_value") is not None:
        text += f" p={cell['p_value']:.3g}"
    return text


# ---------------------------------------------------------------------------
# Instance materialization
# ---------------------------------------------------------------------------

def _materialize(inst: dict) -> tuple[str, str]:
    """Returns (name, process text) for an instance entry."""
    cls = inst.get("class")
    if cls == "fj":
        size, seed = int(inst["size"]), int(inst.get("seed", 0))
        return f"fj-{size}-s{seed}", format_process(gen_fork_join(size, seed))
    if cls == "arch":
        size, seed = int(inst["size"]), int(inst.get("seed", 0))
        k = int(inst.get("promises", 0))
        return (f"arch-{size}:{k}-s{seed}",
                format_process(gen_arch(size, k, seed)))
    if cls == "file":
        with open(inst["path"], "r", encoding="utf-8") as fh:
            return inst.get("name", inst["path"]), fh.read()
    if cls == "text":
        return inst.get("name", "text"), inst["text"]
    raise ValueError(f"unknown instance class {cls!r}")


# ---------------------------------------------------------------------------
# Worker
# ---------------------------------------------------------------------------

def _run_job(text: str, job: dict) -> dict:
    """Executed in a forked child: one timed count or sampling task."""
    try:
        term = validate(parse_process(text)).term
        g = build_ctg(term)
        if has_deadlock(g):
            return {"status": "error", "detail": "deadlocked process"}
        t0 = time.perf_counter()
        if job["kind"] == "count":
            method = job["method"]
            if method == "bits":
                n = count_executions(g)
            elif method == "fj":
                n = fj_count(sp_tree(term))
            else:
                n = len(oracle.brute_force_extensions(
                    g, max_vertices=job["max_vertices"],
                    max_extensions=job["max_extensions"]))
            seconds = time.perf_counter() - t0
            return {"status": "ok", "seconds": seconds, "count": str(n)}
        method = job["method"]
        draws, seed = job["draws"], job["seed"]
        if method == "bits":
            samples = sample_execution(g, draws, seed)
        elif method == "fj":
            shape = sp_tree(term)
            rng = random.Random(seed)
            samples = [fj_sample(shape, rng) for _ in range(draws)]
        elif method == "bruteforce":
            samples = oracle.brute_force_sampler(
                g, draws, seed, max_vertices=job["max_vertices"],
                max_extensions=job["max_extensions"])
        else:
            samples = oracle.mcmc_sampler(g, draws, burn_in=job["burn_in"],
                                          steps_between=job["steps_between"],
                                          seed=seed)
        seconds = time.perf_counter() - t0
        return {"status": "ok", "seconds": seconds,
                "samples": [list(s) for s in samples]}
    except NotForkJoinError:
        return {"status": "inapplicable", "detail": "not fork-join"}
    except oracle.TooLargeError as exc:
        return {"status": "toolarge", "detail": str(exc)}
    except MemoryError:
        return {"status": "memlimit"}
    except Exception as exc:  # recorded per-cell, never fatal
        return {"status": "error", "detail": f"{type(exc).__name__}: {exc}"}


def _child_main(conn, text: str, job: dict) -> None:
    sys.set_int_max_str_digits(2_000_000)
    try:
        result = _run_job(text, job)
    except BaseException as exc:
        result = {"status": "error", "detail": repr(exc)}
    try:
        conn.send(result)
    finally:
        conn.close()


class _Cell:
    def __init__(self, key, text: str, job: dict, timeout_s: float):
        self.key = key
        self.timeout_s = timeout_s
        self.text = text
        self.job = job
        self.parent_conn = None
        self.proc = None
        self.deadline = None

    def start(self) -> None:
        ctx = mp.get_context("fork")
        self.parent_conn, child_conn = ctx.Pipe(duplex=False)
        self.proc = ctx.Process(target=_child_main,
                                args=(child_conn, self.text, self.job))
        self.proc.start()
        child_conn.close()
        self.deadline = time.monotonic() + self.timeout_s

    def poll(self) -> dict | None:
        if self.parent_conn.poll():
            try:
                result = self.parent_conn.recv()
            except EOFError:
                result = {"status": "error", "detail": "worker died"}
            self.proc.join()
            return result
        if not self.proc.is_alive():
            self.proc.join()
            return {"status": "error", "detail": "worker died"}
        if time.monotonic() >= self.deadline:
            self.proc.terminate()
            self.proc.join()
            return {"status": "timeout"}
        return None


def _run_cells(cells: list[_Cell], max_workers: int) -> dict:
    results: dict = {}
    pending = list(cells)
    running: list[_Cell] = []
    while pending or running:
        while pending and len(running) < max_workers:
            cell = pending.pop(0)
            cell.start()
            running.append(cell)
        time.sleep(0.02)
        still: list[_Cell] = []
        for cell in running:
            result = cell.poll()
            if result is None:
                still.append(cell)
            else:
                results[cell.key] = result
        running = still
    return results


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

def bench_run(spec: BenchSpec, max_workers: int = 1) -> BenchReport:
    max_workers = max(1, int(max_workers))
    materialized = [_materialize(inst) for inst in spec.instances]

    cells: list[_Cell] = []
    for idx, (_, text) in enumerate(materialized):
        for method in spec.count_methods:
            job = {"kind": "count", "method": method,
                   "max_vertices": spec.bruteforce_max_vertices,
                   "max_extensions": spec.bruteforce_max_extensions}
            cells.append(_Cell(("count", idx, method), text, job, spec.timeout_s))
        if spec.sample:
            for method in spec.sample.methods:
                job = {"kind": "sample", "method": method,
                       "draws": spec.sample.draws, "seed": spec.sample.seed,
                       "burn_in": spec.sample.burn_in,
                       "steps_between": spec.sample.steps_between,
                       "max_vertices": spec.bruteforce_max_vertices,
                       "max_extensions": spec.bruteforce_max_extensions}
                cells.append(_Cell(("sample", idx, method), text, job,
                                   spec.timeout_s))

    results = _run_cells(cells, max_workers)

    rows: list[dict] = []
    disagreements: list[dict] = []
    for idx, (name, text) in enumerate(materialized):
        term = validate(parse_process(text)).term
        g = build_ctg(term)
        row: dict[str, Any] = {
            "name": name,
            "instance": spec.instances[idx],
            "size": term_size(term),
            "counts": {},
            "samples": {},
            "count": None,
        }
        agreed: dict[str, str] = {}
        for method in spec.count_methods:
            cell = dict(results[("count", idx, method)])
            row["counts"][method] = cell
            if cell["status"] == "ok":
                agreed[method] = cell["count"]
        if agreed:
            values = set(agreed.values())
            row["count"] = agreed[min(agreed)] if len(values) == 1 else None
            if len(values) > 1:
                disagreements.append({"name": name, "counts": agreed})
        support = None
        if spec.sample and spec.sample.chi_square:
            try:
                support = oracle.brute_force_extensions(
                    g, max_vertices=spec.bruteforce_max_vertices,
                    max_extensions=min(100_000, spec.bruteforce_max_extensions))
            except oracle.TooLargeError:
                support = None
        if spec.sample:
            for method in spec.sample.methods:
                cell = dict(results[("sample", idx, method)])
                if cell.get("samples"):
                    samples = [tuple(s) for s in cell.pop("samples")]
                    cell["draws"] = len(samples)
                    cell["valid"] = all(
                        oracle.is_linear_extension(s, g) for s in samples)
                    if support is not None:
                        stat, p = oracle.chi_square_uniformity(samples, support)
                        cell["chi_square"] = stat
                        cell["p_value"] = p
                    else:
                        cell["chi_square"] = None
                        cell["p_value"] = None
                row["samples"][method] = cell
        rows.append(row)

    return BenchReport(rows=rows, disagreements=disagreements)

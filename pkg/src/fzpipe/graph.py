"""Task-graph executor with declared-buffer dependency inference.

Tasks name the buffers they read and write; submission order plus the
read/write sets fully determine the edge set (RAW, WAR, and WAW conflicts,
earlier task first), so the graph is acyclic by construction.  Execution
uses a bounded thread pool; a shared tick counter stamps every task's start
and end so schedules can be audited after the fact: for every derived edge
a -> b the trace must show end_tick(a) <= start_tick(b), and two tasks ran
concurrently iff their tick intervals interleave.

Task bodies receive a view restricted to their declared buffers; reading or
writing anything else is a coding error and raises immediately.  Bodies
must not communicate through any other channel.
"""

from __future__ import annotations

import itertools
import threading
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field as dc_field

from .errors import DuplicateTaskName, TaskFailed, UnknownBuffer


class BufferView:
    """Dict-like access to a task's declared buffers only."""

    def __init__(self, store: dict, readable: frozenset, writable: frozenset):
        self._store = store
        self._readable = readable
        self._writable = writable

    def __getitem__(self, name):
        if name not in self._readable:
            raise UnknownBuffer(f"buffer '{name}' not in this task's read/write set")
        return self._store[name]

    def __setitem__(self, name, value):
        if name not in self._writable:
            raise UnknownBuffer(f"buffer '{name}' not in this task's write set")
        self._store[name] = value


@dataclass(frozen=True)
class Task:
    name: str
    reads: frozenset
    writes: frozenset
    body: object
    index: int


@dataclass(frozen=True)
class TraceEntry:
    name: str
    start_tick: int
    end_tick: int


@dataclass(frozen=True)
class ExecutionTrace:
    entries: tuple[TraceEntry, ...]

    def ticks(self) -> dict[str, tuple[int, int]]:
        return {e.name: (e.start_tick, e.end_tick) for e in self.entries}

    def respects(self, edges) -> bool:
        t = self.ticks()
        return all(t[a][1] <= t[b][0] for a, b in edges)

    def overlapping_pairs(self) -> list[tuple[str, str]]:
        """Task pairs whose tick intervals interleave (ran concurrently)."""

        out = []
        es = self.entries
        for i in range(len(es)):
            for j in range(i + 1, len(es)):
                a, b = es[i], es[j]
                if a.start_tick < b.end_tick and b.start_tick < a.end_tick:
                    out.append((a.name, b.name))
        return out


class TaskGraph:
    def __init__(self):
        self.buffers: dict = {}
        self.tasks: list[Task] = []
        self.edges: set[tuple[str, str]] = set()

    def add_buffer(self, name: str, value=None) -> None:
        if name in self.buffers:
            raise ValueError(f"buffer '{name}' already declared")
        self.buffers[name] = value

    def add_task(self, name: str, reads, writes, body) -> int:
        """Append a task; edges to every prior conflicting task are derived."""

        if any(t.name == name for t in self.tasks):
            raise DuplicateTaskName(name)
        reads = frozenset(reads)
        writes = frozenset(writes)
        for b in reads | writes:
            if b not in self.buffers:
                raise UnknownBuffer(b)
        for prior in self.tasks:
            if (prior.writes & (reads | writes)) or (prior.reads & writes):
                self.edges.add((prior.name, name))
        task = Task(name, reads, writes, body, len(self.tasks))
        self.tasks.append(task)
        return task.index


def graph_execute(g: TaskGraph, workers: int = 1) -> ExecutionTrace:
    """Run every task once, honoring derived edges; returns the tick trace.

    A failing body aborts the graph: tasks not yet started are skipped and
    TaskFailed names the culprit.  Already-running tasks finish first.
    """

    workers = max(1, int(workers))
    clock = itertools.count()
    clock_lock = threading.Lock()

    def tick() -> int:
        with clock_lock:
            return next(clock)

    preds: dict[str, set[str]] = {t.name: set() for t in g.tasks}
    succs: dict[str, set[str]] = {t.name: set() for t in g.tasks}
    for a, b in g.edges:
        preds[b].add(a)
        succs[a].add(b)
    remaining = {t.name: len(preds[t.name]) for t in g.tasks}
    by_name = {t.name: t for t in g.tasks}
    entries: list[TraceEntry] = []
    entries_lock = threading.Lock()

    def run(task: Task):
        start = tick()
        view = BufferView(g.buffers, task.reads | task.writes, task.writes)
        try:
            task.body(view)
        finally:
            end = tick()
            with entries_lock:
                entries.append(TraceEntry(task.name, start, end))

    ready = [t for t in g.tasks if remaining[t.name] == 0]
    pending: dict = {}
    failure: tuple[str, BaseException] | None = None
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for t in ready:
            pending[pool.submit(run, t)] = t
        while pending:
            done, _ = wait(list(pending), return_when=FIRST_COMPLETED)
            for fut in done:
                task = pending.pop(fut)
                exc = fut.exception()
                if exc is not None:
                    if failure is None:
                        failure = (task.name, exc)
                    continue
                if failure is not None:
                    continue
                for nxt in sorted(succs[task.name], key=lambda n: by_name[n].index):
                    remaining[nxt] -= 1
                    if remaining[nxt] == 0:
                        pending[pool.submit(run, by_name[nxt])] = by_name[nxt]
    if failure is not None:
        raise TaskFailed(failure[0], failure[1])
    return ExecutionTrace(tuple(entries))

"""Per-thread multiply-accumulate counter used by the dense ops."""

from __future__ import annotations

import threading
from collections import defaultdict
from contextlib import contextmanager

_local = threading.local()


class MacCounter:
    def __init__(self):
        self.counts: dict[str, int] = defaultdict(int)
        self.scopes: list[str] = []

    @property
    def scope(self) -> str:
        return ".".join(self.scopes) if self.scopes else "<root>"

    def total(self, prefix: str = "") -> int:
        return sum(v for k, v in self.counts.items() if k.startswith(prefix))


@contextmanager
def count_macs():
    prev = getattr(_local, "counter", None)
    counter = MacCounter()
    _local.counter = counter
    try:
        yield counter
    finally:
        _local.counter = prev


@contextmanager
def mac_scope(name: str):
    counter = getattr(_local, "counter", None)
    if counter is None:
        yield
        return
    counter.scopes.append(name)
    try:
        yield
    finally:
        counter.scopes.pop()


def record(n: int) -> None:
    counter = getattr(_local, "counter", None)
    if counter is not None:
        counter.counts[counter.scope] += int(n)

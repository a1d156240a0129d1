"""What the driver needs from a serverless backend."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Generator, Iterable

from ..payload import WorkerResponse
from ..storage import DataSource, ObjectStore

# error_kind values produced by the platform itself rather than the worker
TIMEOUT = "Timeout"
TRANSPORT = "TransportError"
INJECTED = "InjectedFault"
PLATFORM_KINDS = frozenset({TIMEOUT, TRANSPORT, INJECTED})


@dataclass(frozen=True)
class Invocation:
    """One synchronous invocation request yielded by a controller."""

    payload: bytes
    delay_s: float = 0.0
    deadline_s: float | None = None


# A controller yields invocations and is sent back the response to each one.
Controller = Generator[Invocation, WorkerResponse, None]


class Backend:
    name = "abstract"
    store: ObjectStore
    source: DataSource

    def invoke_sync(self, payload: bytes, deadline_s: float | None = None) -> WorkerResponse:
        raise NotImplementedError

    def warm_pool(self, k: int) -> None:
        raise NotImplementedError

    def run_controllers(self, controllers: Iterable[Controller]) -> None:
        """Drive every controller to completion, each in its own logical thread."""
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

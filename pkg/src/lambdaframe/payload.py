"""Wire envelopes: the invocation payload and the worker response.

Both are canonical JSON (sorted keys, no whitespace, ASCII only). Binary fields
are base64. Field reference:

payload
    version       int, must be in SUPPORTED_VERSIONS
    kind          "invoke" or "warmup"
    run_id        str
    attempt       int, 1-based
    range         {"partition_id", "begin", "end", "clusters": [[file, cluster], ...]}
    script        graph text
    token         base64, omitted when there is no token
    headers       [{"path": str, "content": base64}, ...]
    dataset       inline manifest, or
    dataset_ref   object-store key of the manifest (exactly one of the two)

response
    version, status ("success"|"failure"), partition_id, attempt,
    result_ref (success), error_kind + error_message (failure),
    monitoring (trace object, present whenever the worker started)
"""

from __future__ import annotations

import base64
import binascii
import json
from dataclasses import dataclass, field

from .dataset import DatasetDescriptor, EntryRange, ValidationError
from .monitor import ExecutionTrace

VERSION = 1
SUPPORTED_VERSIONS = frozenset({1})
INLINE_DATASET_LIMIT = 256 * 1024

INVOKE = "invoke"
WARMUP = "warmup"

SUCCESS = "success"
FAILURE = "failure"


class DecodeError(ValueError):
    def __init__(self, position: int | None, reason: str):
        self.position = position
        self.reason = reason
        where = f" at byte {position}" if position is not None else ""
        super().__init__(f"cannot decode{where}: {reason}")


class VersionError(DecodeError):
    def __init__(self, got, supported=SUPPORTED_VERSIONS):
        self.got = got
        self.supported = frozenset(supported)
        super().__init__(None, f"unsupported version {got!r}, supported {sorted(self.supported)}")


@dataclass(frozen=True)
class Payload:
    range: EntryRange
    script: str
    dataset: DatasetDescriptor | None = None
    dataset_ref: str | None = None
    token: bytes | None = None
    headers: tuple[tuple[str, bytes], ...] = ()
    run_id: str = "run"
    attempt: int = 1
    kind: str = INVOKE
    version: int = VERSION

    def with_attempt(self, attempt: int) -> "Payload":
        return Payload(
            self.range, self.script, self.dataset, self.dataset_ref, self.token,
            self.headers, self.run_id, attempt, self.kind, self.version,
        )


def _dumps(doc: dict) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=True).encode("ascii")


def _b64(b: bytes) -> str:
    return base64.b64encode(b).decode("ascii")


def encode(p: Payload) -> bytes:
    if (p.dataset is None) == (p.dataset_ref is None):
        raise ValueError("payload needs exactly one of dataset or dataset_ref")
    paths = [h[0] for h in p.headers]
    if len(set(paths)) != len(paths):
        raise ValueError("header paths must be unique")
    doc: dict = {
        "version": p.version,
        "kind": p.kind,
        "run_id": p.run_id,
        "attempt": p.attempt,
        "range": p.range.to_dict(),
        "script": p.script,
        "headers": [{"path": path, "content": _b64(content)} for path, content in p.headers],
    }
    if p.dataset is not None:
        doc["dataset"] = p.dataset.to_manifest()
    else:
        doc["dataset_ref"] = p.dataset_ref
    if p.token is not None:
        doc["token"] = _b64(p.token)
    return _dumps(doc)


def _load(b: bytes) -> dict:
    try:
        text = b.decode("utf-8")
    except UnicodeDecodeError as e:
        raise DecodeError(e.start, "not UTF-8") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise DecodeError(e.pos, e.msg) from None
    if not isinstance(doc, dict):
        raise DecodeError(0, "top level must be an object")
    if "version" not in doc:
        raise DecodeError(None, "missing version")
    if doc["version"] not in SUPPORTED_VERSIONS:
        raise VersionError(doc["version"])
    return doc


def _unb64(s, what: str) -> bytes:
    try:
        return base64.b64decode(s, validate=True)
    except (binascii.Error, TypeError, ValueError):
        raise DecodeError(None, f"{what} is not valid base64") from None


def decode(b: bytes) -> Payload:
    doc = _load(b)
    try:
        rng = EntryRange.from_dict(doc["range"])
        script = doc["script"]
        if not isinstance(script, str):
            raise DecodeError(None, "script must be a string")
        dataset = dataset_ref = None
        if "dataset" in doc:
            dataset = DatasetDescriptor.from_manifest(doc["dataset"])
        elif "dataset_ref" in doc:
            dataset_ref = str(doc["dataset_ref"])
        else:
            raise DecodeError(None, "missing dataset or dataset_ref")
        token = _unb64(doc["token"], "token") if "token" in doc else None
        headers = tuple((str(h["path"]), _unb64(h["content"], "header")) for h in doc.get("headers", ()))
        kind = doc.get("kind", INVOKE)
        if kind not in (INVOKE, WARMUP):
            raise DecodeError(None, f"unknown payload kind {kind!r}")
        return Payload(
            range=rng,
            script=script,
            dataset=dataset,
            dataset_ref=dataset_ref,
            token=token,
            headers=headers,
            run_id=str(doc.get("run_id", "run")),
            attempt=int(doc.get("attempt", 1)),
            kind=kind,
            version=int(doc["version"]),
        )
    except KeyError as e:
        raise DecodeError(None, f"missing field {e.args[0]!r}") from None
    except (TypeError, ValueError, ValidationError) as e:
        if isinstance(e, DecodeError):
            raise
        raise DecodeError(None, str(e)) from None


@dataclass
class WorkerResponse:
    status: str
    partition_id: int
    attempt: int = 1
    result_ref: str | None = None
    error_kind: str | None = None
    error_message: str | None = None
    monitoring: ExecutionTrace | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status == SUCCESS and self.result_ref is None:
            raise ValueError("successful response needs result_ref")
        if self.status == FAILURE and (self.error_kind is None or self.error_message is None):
            raise ValueError("failed response needs error_kind and error_message")

    @property
    def ok(self) -> bool:
        return self.status == SUCCESS


def encode_response(r: WorkerResponse) -> bytes:
    doc: dict = {"version": VERSION, "status": r.status, "partition_id": r.partition_id, "attempt": r.attempt}
    if r.result_ref is not None:
        doc["result_ref"] = r.result_ref
    if r.error_kind is not None:
        doc["error_kind"] = r.error_kind
        doc["error_message"] = r.error_message
    if r.monitoring is not None:
        doc["monitoring"] = r.monitoring.to_json()
    if r.extra:
        doc["extra"] = r.extra
    return _dumps(doc)


def decode_response(b: bytes) -> WorkerResponse:
    doc = _load(b)
    try:
        return WorkerResponse(
            status=doc["status"],
            partition_id=int(doc["partition_id"]),
            attempt=int(doc.get("attempt", 1)),
            result_ref=doc.get("result_ref"),
            error_kind=doc.get("error_kind"),
            error_message=doc.get("error_message"),
            monitoring=ExecutionTrace.from_json(doc["monitoring"]) if "monitoring" in doc else None,
            extra=doc.get("extra", {}),
        )
    except KeyError as e:
        raise DecodeError(None, f"missing field {e.args[0]!r}") from None
    except (TypeError, ValueError) as e:
        raise DecodeError(None, str(e)) from None

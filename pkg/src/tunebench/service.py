"""Client-server evaluation over length-prefixed JSON frames.

A frame is a 4-byte big-endian payload length followed by that many bytes
of UTF-8 JSON encoding a message envelope:

    {"protocol_version": 1, "message_id": "...", "kind": "...", "body": {...}}

kinds: hello, study_definition, query, result, invalid_config, error,
shutdown. The server loads its backend exactly once before accepting
connections, answers each connection's messages in order, and serializes
backend evaluations across connections. Clients never retry silently;
transport trouble surfaces as an exception and re-measuring is the
caller's decision.
"""

from __future__ import annotations

import json
import socket
import struct
import threading
import time
from typing import Any, Iterable, Mapping

from .records import (
    FidelitySettings,
    InvalidConfigError,
    InvalidFidelityError,
    QueryResult,
    canonical_json,
)
from .space import ConfigDomainError
from .studies import StudyDefinition, from_document, resolve_fidelities, to_document
from .kernels import execute, list_default_config, problem_for_study

__all__ = [
    "PROTOCOL_VERSION",
    "MAX_PAYLOAD",
    "KINDS",
    "FrameError",
    "TransportError",
    "ServiceError",
    "envelope",
    "encode_frame",
    "decode_payload",
    "read_frame",
    "KernelBackend",
    "BenchServer",
    "BenchClient",
    "RoundRobinDispatcher",
    "parse_address",
]

PROTOCOL_VERSION = 1
MAX_PAYLOAD = 16 * 2**20
KINDS = (
    "hello",
    "study_definition",
    "query",
    "result",
    "invalid_config",
    "error",
    "shutdown",
)
_ENVELOPE_FIELDS = ("protocol_version", "message_id", "kind", "body")


class FrameError(ValueError):
    """A frame or envelope violates the wire format."""


class TransportError(RuntimeError):
    """The connection failed mid-exchange. Nothing was retried."""


class ServiceError(RuntimeError):
    """The server answered with an error envelope."""


def envelope(kind: str, message_id: str, body: Mapping[str, Any]) -> dict:
    return {
        "protocol_version": PROTOCOL_VERSION,
        "message_id": message_id,
        "kind": kind,
        "body": dict(body),
    }


def _check_envelope(obj: Any) -> dict:
    if not isinstance(obj, dict):
        raise FrameError("envelope must be an object")
    if set(obj) != set(_ENVELOPE_FIELDS):
        raise FrameError(f"envelope fields must be exactly {_ENVELOPE_FIELDS}")
    if not isinstance(obj["protocol_version"], int) or isinstance(obj["protocol_version"], bool):
        raise FrameError("protocol_version must be an integer")
    if not isinstance(obj["message_id"], str):
        raise FrameError("message_id must be a string")
    if obj["kind"] not in KINDS:
        raise FrameError(f"unknown message kind {obj['kind']!r}")
    if not isinstance(obj["body"], dict):
        raise FrameError("body must be an object")
    return obj


def encode_frame(env: Mapping[str, Any]) -> bytes:
    """Envelope to length-prefixed bytes. Rejects oversized payloads."""
    _check_envelope(dict(env))
    payload = canonical_json(env).encode("utf-8")
    if len(payload) > MAX_PAYLOAD:
        raise FrameError(f"payload of {len(payload)} bytes exceeds {MAX_PAYLOAD}")
    return struct.pack(">I", len(payload)) + payload


def decode_payload(payload: bytes) -> dict:
    try:
        obj = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FrameError(f"payload is not UTF-8 JSON: {e}") from None
    return _check_envelope(obj)


def read_frame(stream) -> dict | None:
    """Next envelope from a binary stream; None on EOF at a frame boundary."""
    header = stream.read(4)
    if header == b"":
        return None
    if len(header) < 4:
        raise FrameError("truncated length prefix")
    (length,) = struct.unpack(">I", header)
    if length > MAX_PAYLOAD:
        raise FrameError(f"declared payload of {length} bytes exceeds {MAX_PAYLOAD}")
    payload = b""
    while len(payload) < length:
        chunk = stream.read(length - len(payload))
        if not chunk:
            raise FrameError("connection ended mid-payload")
        payload += chunk
    return decode_payload(payload)


def parse_address(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"address must look like host:port, got {text!r}")
    return host or "127.0.0.1", int(port)


# ---------------------------------------------------------------------------
# backends


class KernelBackend:
    """Runs the native kernel a study's problem block describes."""

    backend_kind = "kernel"

    def __init__(self, study: StudyDefinition, preset: str | None = None):
        self.study = study
        self._preset = preset
        self._problem = None
        self.init_count = 0

    def initialize(self):
        self.init_count += 1
        self._problem = problem_for_study(self.study, self._preset)
        # run the default config once at minimal effort so jit compilation
        # happens here, not inside the first measured query
        warm = list_default_config(self.study.problem.kernel)
        execute(
            self.study,
            self._problem,
            warm,
            FidelitySettings(iterations=1, repeats=1),
            evaluation_id="warmup",
        )

    def evaluate(
        self, config: Mapping, fidelities: FidelitySettings, evaluation_id: str = ""
    ) -> QueryResult:
        if self._problem is None:
            raise RuntimeError("backend not initialized")
        return execute(
            self.study, self._problem, config, fidelities, evaluation_id=evaluation_id
        )


# ---------------------------------------------------------------------------
# server


class BenchServer:
    """One backend behind a listening socket.

    Connections are handled concurrently but evaluations hold a global
    lock, so overlapping queries from two connections serialize;
    busy_seconds accumulates the time spent inside the lock.
    """

    def __init__(self, backend, host: str = "127.0.0.1", port: int = 0):
        self.backend = backend
        self._host = host
        self._port = port
        self._listener: socket.socket | None = None
        self._bound: tuple[str, int] | None = None
        self._eval_lock = threading.Lock()
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._conns: list[socket.socket] = []
        self.busy_seconds = 0.0

    @property
    def address(self) -> tuple[str, int]:
        if self._bound is None:
            raise RuntimeError("server not started")
        return self._bound

    @property
    def label(self) -> str:
        host, port = self.address
        return f"{host}:{port}"

    def start(self):
        """Initialize the backend (exactly once), then begin accepting."""
        if self._listener is not None:
            raise RuntimeError("server already started")
        self.backend.initialize()
        self._listener = socket.create_server(
            (self._host, self._port), backlog=16, reuse_port=False
        )
        self._bound = self._listener.getsockname()[:2]
        self._listener.settimeout(0.2)
        t = threading.Thread(target=self._accept_loop, name="bench-accept", daemon=True)
        t.start()
        self._threads.append(t)
        return self

    def serve_forever(self):
        if self._listener is None:
            self.start()
        try:
            while not self._stop.wait(0.2):
                pass
        except KeyboardInterrupt:
            pass
        self.close()

    def close(self):
        self._stop.set()
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        for c in list(self._conns):
            try:
                c.close()
            except OSError:
                pass
        for t in self._threads:
            if t is not threading.current_thread():
                t.join(timeout=5.0)

    def _accept_loop(self):
        while not self._stop.is_set():
            try:
                conn, _ = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            t = threading.Thread(
                target=self._serve_connection, args=(conn,), daemon=True
            )
            t.start()
            self._threads.append(t)

    def _serve_connection(self, conn: socket.socket):
        self._conns.append(conn)
        stream = conn.makefile("rb")
        queries = 0

        def reply(kind, message_id, body):
            conn.sendall(encode_frame(envelope(kind, message_id, body)))

        try:
            while not self._stop.is_set():
                try:
                    env = read_frame(stream)
                except FrameError as e:
                    # best effort error reply, then drop the connection
                    try:
                        reply("error", "", {"reason": f"malformed frame: {e}"})
                    except OSError:
                        pass
                    return
                if env is None:
                    return
                mid = env["message_id"]
                if env["protocol_version"] != PROTOCOL_VERSION:
                    reply("error", mid, {"reason": "unsupported version"})
                    continue
                kind = env["kind"]
                if kind == "hello":
                    reply("study_definition", mid, to_document(self.backend.study))
                elif kind == "query":
                    queries += 1
                    self._answer_query(reply, mid, env["body"], f"q{queries}")
                elif kind == "shutdown":
                    reply("shutdown", mid, {})
                    # stop accepting immediately so later connects are refused
                    # instead of sitting unanswered in the listen backlog
                    self._stop.set()
                    if self._listener is not None:
                        try:
                            self._listener.close()
                        except OSError:
                            pass
                    return
                else:
                    reply("error", mid, {"reason": f"unexpected message kind {kind!r}"})
        except OSError:
            pass
        except Exception as e:  # never let a connection take the server down
            try:
                reply("error", "", {"reason": f"internal error: {type(e).__name__}: {e}"})
            except OSError:
                pass
        finally:
            try:
                conn.close()
            except OSError:
                pass
            if conn in self._conns:
                self._conns.remove(conn)

    def _answer_query(self, reply, mid: str, body: Mapping, evaluation_id: str):
        study = self.backend.study
        config = body.get("configuration")
        if not isinstance(config, dict):
            reply("invalid_config", mid, {"violations": ["query body needs a configuration object"]})
            return
        try:
            fids = resolve_fidelities(study, body.get("fidelities"))
            check = study.space.validate(config)
        except (InvalidFidelityError, ConfigDomainError) as e:
            reply("invalid_config", mid, {"violations": [str(e)]})
            return
        if not check.valid:
            reply("invalid_config", mid, {"violations": list(check.violated)})
            return
        with self._eval_lock:
            t0 = time.perf_counter()
            result = self.backend.evaluate(config, fids, evaluation_id)
            self.busy_seconds += time.perf_counter() - t0
        reply("result", mid, result.to_dict())


# ---------------------------------------------------------------------------
# client


class BenchClient:
    """Blocking single-connection client."""

    def __init__(self, address: str | tuple[str, int], timeout: float = 600.0):
        if isinstance(address, str):
            address = parse_address(address)
        self._address = address
        self._timeout = timeout
        self._sock: socket.socket | None = None
        self._stream = None
        self._counter = 0
        self.study: StudyDefinition | None = None

    @property
    def label(self) -> str:
        return f"{self._address[0]}:{self._address[1]}"

    def connect(self) -> "BenchClient":
        try:
            self._sock = socket.create_connection(self._address, timeout=self._timeout)
        except OSError as e:
            raise TransportError(f"cannot connect to {self.label}: {e}") from None
        self._stream = self._sock.makefile("rb")
        return self

    def __enter__(self):
        if self._sock is None:
            self.connect()
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
            self._sock = None

    def _roundtrip(self, kind: str, body: Mapping[str, Any]) -> dict:
        if self._sock is None:
            raise TransportError("client is not connected")
        self._counter += 1
        mid = f"m{self._counter}"
        try:
            self._sock.sendall(encode_frame(envelope(kind, mid, body)))
            reply = read_frame(self._stream)
        except (OSError, FrameError) as e:
            raise TransportError(f"exchange with {self.label} failed: {e}") from None
        if reply is None:
            raise TransportError(f"{self.label} closed the connection")
        if reply["message_id"] != mid:
            raise ServiceError(
                f"reply correlation mismatch: sent {mid}, got {reply['message_id']!r}"
            )
        if reply["kind"] == "error":
            raise ServiceError(reply["body"].get("reason", "unspecified server error"))
        return reply

    def fetch_study(self) -> StudyDefinition:
        reply = self._roundtrip("hello", {"client": "tunebench"})
        if reply["kind"] != "study_definition":
            raise ServiceError(f"expected a study definition, got {reply['kind']!r}")
        self.study = from_document(reply["body"])
        return self.study

    def query(
        self, config: Mapping[str, Any], fidelities: Mapping[str, Any] | None = None
    ) -> QueryResult:
        body = {"configuration": dict(config)}
        if fidelities:
            body["fidelities"] = dict(fidelities)
        reply = self._roundtrip("query", body)
        if reply["kind"] == "invalid_config":
            violations = reply["body"].get("violations", [])
            err = InvalidConfigError("; ".join(violations) or "invalid configuration")
            err.violations = tuple(violations)
            raise err
        if reply["kind"] != "result":
            raise ServiceError(f"expected a result, got {reply['kind']!r}")
        return QueryResult.from_dict(reply["body"])

    def shutdown_server(self):
        reply = self._roundtrip("shutdown", {})
        if reply["kind"] != "shutdown":
            raise ServiceError(f"expected a shutdown ack, got {reply['kind']!r}")


class RoundRobinDispatcher:
    """Fans sequential queries out over several servers, one at a time.

    All servers must serve the same study id; results come back labeled
    with the answering server so logs can tell hardware apart.
    """

    def __init__(self, addresses: Iterable[str], timeout: float = 600.0):
        self._clients = [BenchClient(a, timeout) for a in addresses]
        if not self._clients:
            raise ValueError("at least one server address is required")
        self._next = 0
        self.study: StudyDefinition | None = None

    def connect(self) -> "RoundRobinDispatcher":
        ids = []
        for c in self._clients:
            c.connect()
            ids.append(c.fetch_study().study_id)
        if len(set(ids)) != 1:
            raise ServiceError(f"servers disagree on the study: {ids}")
        self.study = self._clients[0].study
        return self

    def __enter__(self):
        if self.study is None:
            self.connect()
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        for c in self._clients:
            c.close()

    def query(
        self, config: Mapping[str, Any], fidelities: Mapping[str, Any] | None = None
    ) -> tuple[str, QueryResult]:
        client = self._clients[self._next]
        self._next = (self._next + 1) % len(self._clients)
        return client.label, client.query(config, fidelities)

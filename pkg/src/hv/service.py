"""HTTP gateway: snapshots in, event batches in, diagnostics out.

One process hosts all tiers: the gateway owns an :class:`~hv.engine.Engine`
per model, writes every delta through the :class:`~hv.store.DiagnosticStore`
and fans deltas out to server-sent-event subscribers.  Requests for
different models run fully concurrently; per model, snapshot PUTs and event
POSTs are serialized in arrival order while reads never block writers
beyond the store's atomic swap.

Routes (all payloads UTF-8):

    PUT  /models/{id}                   canonical model document
    POST /models/{id}/events            newline-delimited change events
    GET  /models/{id}/inconsistencies   ?ruleId=&severity=&interactionId=
    GET  /models/{id}/summary
    GET  /models/{id}/stream?from=N     server-sent events (delta/resync)
    GET  /health

Error bodies are ``{code, message, detail?}``.
"""

from __future__ import annotations

import json
import logging
import queue
import re
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, unquote, urlparse

import hv
from hv.canonical import parse_canonical
from hv.diffing import ChangeEvent, parse_events
from hv.engine import DiagnosticDelta, Engine
from hv.errors import ResyncRequiredError, StaleEventError
from hv.store import DiagnosticStore

log = logging.getLogger(__name__)

DEFAULT_PORT = 8787
DEFAULT_HEARTBEAT_SECONDS = 15.0

_RESYNC = object()  # sentinel pushed to subscribers when state is replaced


@dataclass(slots=True)
class SessionRecord:
    model_id: str
    revision: int
    last_seq: int
    created_at: float
    updated_at: float


class _Subscriber:
    __slots__ = ("queue", "dead")

    def __init__(self) -> None:
        self.queue: queue.Queue = queue.Queue(maxsize=1024)
        self.dead = False


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, detail: dict | None = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.detail = detail

    def body(self) -> dict:
        out = {"code": self.code, "message": str(self)}
        if self.detail:
            out["detail"] = self.detail
        return out


class Gateway:
    """Transport-independent request handling; the HTTP layer is a shim."""

    def __init__(
        self,
        store: DiagnosticStore | None = None,
        heartbeat_seconds: float = DEFAULT_HEARTBEAT_SECONDS,
    ):
        self.store = store if store is not None else DiagnosticStore()
        self.heartbeat_seconds = heartbeat_seconds
        self._engines: dict[str, Engine] = {}
        self._sessions: dict[str, SessionRecord] = {}
        self._subscribers: dict[str, list[_Subscriber]] = {}
        self._model_locks: dict[str, threading.RLock] = {}
        self._registry_lock = threading.Lock()

    def _lock_for(self, model_id: str) -> threading.RLock:
        with self._registry_lock:
            lock = self._model_locks.get(model_id)
            if lock is None:
                lock = self._model_locks[model_id] = threading.RLock()
            return lock

    def _require_engine(self, model_id: str) -> Engine:
        engine = self._engines.get(model_id)
        if engine is None:
            raise ApiError(404, "notFound", f"unknown model {model_id!r}")
        return engine

    # --- write paths ----------------------------------------------------------

    def put_model(self, model_id: str, body: str) -> dict:
        report = parse_canonical(body)
        if report.fatal is not None:
            if report.fatal.code == "duplicateId":
                raise ApiError(
                    422,
                    "duplicateId",
                    report.fatal.message,
                    {"path": report.fatal.path},
                )
            raise ApiError(
                400, "parseFatal", report.fatal.message, {"path": report.fatal.path}
            )
        model = report.model
        if model.model_id != model_id:
            raise ApiError(
                400,
                "modelIdMismatch",
                f"document modelId {model.model_id!r} does not match URL {model_id!r}",
            )
        with self._lock_for(model_id):
            engine = Engine(model)
            diagnostics = engine.current()
            self._engines[model_id] = engine
            self.store.reset(model_id, engine.revision, diagnostics)
            now = time.time()
            session = self._sessions.get(model_id)
            created = session.created_at if session else now
            self._sessions[model_id] = SessionRecord(
                model_id, engine.revision, engine.last_seq, created, now
            )
            self._broadcast(model_id, _RESYNC)
        return {
            "revision": engine.revision,
            "diagnostics": [d.to_dict() for d in diagnostics],
            "summary": self.store.get_summary(model_id).to_dict(),
        }

    def post_events(self, model_id: str, body: str) -> dict:
        try:
            events = parse_events(body)
        except ValueError as exc:
            raise ApiError(400, "badRequest", f"unparseable event batch: {exc}") from None
        with self._lock_for(model_id):
            engine = self._require_engine(model_id)
            before_revision = engine.revision
            try:
                delta = engine.process(events)
            except ResyncRequiredError as exc:
                raise ApiError(409, "resyncRequired", str(exc)) from None
            except StaleEventError as exc:
                raise ApiError(
                    422, "staleEvent", str(exc), {"seq": exc.seq}
                ) from None
            if engine.revision != before_revision:
                self.store.put_delta(model_id, engine.revision, delta)
                session = self._sessions[model_id]
                session.revision = engine.revision
                session.last_seq = engine.last_seq
                session.updated_at = time.time()
                self._broadcast(model_id, delta)
            return {"revision": engine.revision, "delta": delta.to_dict()}

    # --- read paths -----------------------------------------------------------

    def get_inconsistencies(self, model_id: str, query: dict) -> dict:
        self._require_engine(model_id)
        severity = query.get("severity")
        if severity is not None and severity not in ("error", "warning", "info"):
            raise ApiError(400, "badRequest", f"invalid severity {severity!r}")
        revision, diagnostics = self.store.get_current(
            model_id,
            rule_id=query.get("ruleId"),
            severity=severity,
            interaction_id=query.get("interactionId"),
        )
        return {"revision": revision, "diagnostics": [d.to_dict() for d in diagnostics]}

    def get_summary(self, model_id: str) -> dict:
        self._require_engine(model_id)
        return self.store.get_summary(model_id).to_dict()

    def health(self) -> dict:
        return {"status": "ok", "version": hv.__version__}

    # --- streaming --------------------------------------------------------------

    def open_stream(self, model_id: str, from_revision: int | None):
        """Catch-up deltas plus a live subscription, atomically.

        Returns ``(catch_up, subscriber)``; ``subscriber`` is None when the
        requested revision is no longer reachable and the caller must emit a
        single resync record instead.
        """
        with self._lock_for(model_id):
            engine = self._require_engine(model_id)
            start = engine.revision if from_revision is None else from_revision
            try:
                catch_up = self.store.get_deltas_since(model_id, start)
            except ResyncRequiredError:
                return [], None
            subscriber = _Subscriber()
            self._subscribers.setdefault(model_id, []).append(subscriber)
            return catch_up, subscriber

    def close_stream(self, model_id: str, subscriber: _Subscriber) -> None:
        with self._lock_for(model_id):
            subscribers = self._subscribers.get(model_id, [])
            if subscriber in subscribers:
                subscribers.remove(subscriber)

    def _broadcast(self, model_id: str, item) -> None:
        for subscriber in self._subscribers.get(model_id, []):
            try:
                subscriber.queue.put_nowait(item)
            except queue.Full:
                subscriber.dead = True

    def current_revision(self, model_id: str) -> int:
        engine = self._engines.get(model_id)
        return engine.revision if engine is not None else 0


# --- HTTP layer ----------------------------------------------------------------

_MODEL_ROUTE = re.compile(r"^/models/([^/]+)(?:/([a-z]+))?$")


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    @property
    def gateway(self) -> Gateway:
        return self.server.gateway  # type: ignore[attr-defined]

    def log_message(self, fmt, *args):  # default writes to stderr
        log.debug("%s %s", self.address_string(), fmt % args)

    def _send_json(self, status: int, body: dict) -> None:
        data = json.dumps(body, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _read_body(self) -> str:
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length).decode("utf-8")

    def _route(self):
        parsed = urlparse(self.path)
        query = {k: v[0] for k, v in parse_qs(parsed.query).items()}
        match = _MODEL_ROUTE.match(parsed.path)
        if match:
            return unquote(match.group(1)), match.group(2), query
        return None, parsed.path, query

    def do_GET(self) -> None:
        model_id, tail, query = self._route()
        try:
            if model_id is None:
                if tail == "/health":
                    self._send_json(200, self.gateway.health())
                else:
                    raise ApiError(404, "notFound", f"no route {tail!r}")
            elif tail == "inconsistencies":
                self._send_json(200, self.gateway.get_inconsistencies(model_id, query))
            elif tail == "summary":
                self._send_json(200, self.gateway.get_summary(model_id))
            elif tail == "stream":
                self._stream(model_id, query)
            else:
                raise ApiError(404, "notFound", f"no route for GET {self.path!r}")
        except ApiError as exc:
            self._send_json(exc.status, exc.body())

    def do_PUT(self) -> None:
        model_id, tail, _ = self._route()
        try:
            if model_id is None or tail is not None:
                raise ApiError(404, "notFound", f"no route for PUT {self.path!r}")
            self._send_json(200, self.gateway.put_model(model_id, self._read_body()))
        except ApiError as exc:
            self._send_json(exc.status, exc.body())

    def do_POST(self) -> None:
        model_id, tail, _ = self._route()
        try:
            if model_id is None or tail != "events":
                raise ApiError(404, "notFound", f"no route for POST {self.path!r}")
            self._send_json(200, self.gateway.post_events(model_id, self._read_body()))
        except ApiError as exc:
            self._send_json(exc.status, exc.body())

    # --- server-sent events -----------------------------------------------------

    def _sse_write(self, text: str) -> None:
        self.wfile.write(text.encode("utf-8"))
        self.wfile.flush()

    def _sse_record(self, event: str, data: dict) -> None:
        self._sse_write(f"event: {event}\ndata: {json.dumps(data, ensure_ascii=False)}\n\n")

    def _sse_resync(self, model_id: str) -> None:
        self._sse_record(
            "resync",
            {
                "code": "resyncRequired",
                "currentRevision": self.gateway.current_revision(model_id),
            },
        )

    def _stream(self, model_id: str, query: dict) -> None:
        from_revision: int | None = None
        if "from" in query:
            try:
                from_revision = int(query["from"])
            except ValueError:
                raise ApiError(400, "badRequest", f"invalid from revision {query['from']!r}")
        catch_up, subscriber = self.gateway.open_stream(model_id, from_revision)
        self.send_response(200)
        self.send_header("Content-Type", "text/event-stream; charset=utf-8")
        self.send_header("Cache-Control", "no-cache")
        self.send_header("Connection", "close")
        self.end_headers()
        try:
            if subscriber is None:
                self._sse_resync(model_id)
                return
            for delta in catch_up:
                self._sse_record("delta", delta.to_dict())
            heartbeat = self.gateway.heartbeat_seconds
            while True:
                if subscriber.dead:
                    self._sse_resync(model_id)
                    return
                try:
                    item = subscriber.queue.get(timeout=heartbeat)
                except queue.Empty:
                    self._sse_write(": hb\n\n")
                    continue
                if item is _RESYNC:
                    self._sse_resync(model_id)
                    return
                self._sse_record("delta", item.to_dict())
        except (BrokenPipeError, ConnectionResetError):
            log.debug("stream client for %s disconnected", model_id)
        finally:
            if subscriber is not None:
                self.gateway.close_stream(model_id, subscriber)


class GatewayServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address, gateway: Gateway):
        super().__init__(address, _Handler)
        self.gateway = gateway


def make_server(
    port: int = DEFAULT_PORT,
    host: str = "127.0.0.1",
    gateway: Gateway | None = None,
) -> GatewayServer:
    """Bind a server; ``port=0`` picks a free port (see ``server_address``)."""
    return GatewayServer((host, port), gateway if gateway is not None else Gateway())


def run_serve(port: int = DEFAULT_PORT, host: str = "127.0.0.1") -> None:
    server = make_server(port, host)
    log.info("serving on %s:%s", *server.server_address)
    try:
        server.serve_forever()
    finally:
        server.server_close()

"""HTTP routing service over an index container.

Endpoints::

    GET  /health    -> {"status": "ok"}
    GET  /version   -> index version, model id, node counts
    POST /retrieve  -> same record as the ``query`` subcommand

The router snapshot is replaced atomically when the container file changes
on disk; a request always sees exactly one snapshot.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any, Callable

from .config import ConfigError, request_from_payload, run_query
from .embedding import EmbeddingProvider
from .index import CONTAINER_FORMAT_VERSION, load_container
from .router import Router

logger = logging.getLogger(__name__)


class RoutingService:
    def __init__(self, container_path: str | os.PathLike[str], provider: EmbeddingProvider):
        self.path = Path(container_path)
        self.provider = provider
        self._lock = threading.Lock()
        self._mtime: int | None = None
        self._router: Router | None = None
        self.reload()

    def reload(self) -> Router:
        mtime = self.path.stat().st_mtime_ns
        router = Router.from_container(load_container(self.path, self.provider.model_id), self.provider)
        with self._lock:
            self._router, self._mtime = router, mtime
        logger.info("loaded index %s (version %s)", self.path, router.version)
        return router

    def snapshot(self) -> Router:
        try:
            mtime = self.path.stat().st_mtime_ns
        except OSError:
            mtime = self._mtime
        with self._lock:
            router, current = self._router, self._mtime
        if mtime != current:
            try:
                router = self.reload()
            except Exception:  # keep serving the old snapshot until the file changes again
                logger.exception("index reload failed; keeping version %s", router.version if router else None)
                with self._lock:
                    self._mtime = mtime
        assert router is not None
        return router

    def handle(self, method: str, path: str, body: bytes = b"") -> tuple[int, dict[str, Any]]:
        router = self.snapshot()
        if method == "GET" and path == "/health":
            return 200, {"status": "ok"}
        if method == "GET" and path == "/version":
            return 200, {
                "index_version": router.version,
                "model_id": router.model_id,
                "format_version": CONTAINER_FORMAT_VERSION,
                "agents": len(router.graph.agents),
                "tools": len(router.graph.tools),
            }
        if path == "/retrieve":
            if method != "POST":
                return 405, {"error": "use POST"}
            try:
                payload = json.loads(body or b"{}")
                if not isinstance(payload, dict):
                    raise ConfigError("payload must be a JSON object")
                req, strategy = request_from_payload(payload)
            except (json.JSONDecodeError, ConfigError) as exc:
                return 400, {"error": str(exc)}
            return 200, run_query(router, req, strategy)
        return 404, {"error": f"no route for {method} {path}"}


def _handler_for(service: RoutingService) -> Callable[..., BaseHTTPRequestHandler]:
    class Handler(BaseHTTPRequestHandler):
        def _send(self, status: int, doc: dict[str, Any]) -> None:
            data = json.dumps(doc).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def _dispatch(self, method: str) -> None:
            length = int(self.headers.get("Content-Length") or 0)
            body = self.rfile.read(length) if length else b""
            try:
                status, doc = service.handle(method, self.path.split("?", 1)[0], body)
            except Exception as exc:
                logger.exception("request failed")
                status, doc = HTTPStatus.INTERNAL_SERVER_ERROR, {"error": str(exc)}
            self._send(status, doc)

        def do_GET(self) -> None:
            self._dispatch("GET")

        def do_POST(self) -> None:
            self._dispatch("POST")

        def log_message(self, fmt: str, *args: Any) -> None:
            logger.debug("%s - " + fmt, self.address_string(), *args)

    return Handler


def make_server(service: RoutingService, host: str = "127.0.0.1", port: int = 8080) -> ThreadingHTTPServer:
    return ThreadingHTTPServer((host, port), _handler_for(service))

"""HTTP surface of the search service: ``GET /search`` and ``GET /health``.

Built on the stdlib threading server so the service can run anywhere the
package installs; responses are JSON with field names exactly matching the
search result structure.
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from .service import RequestError, SearchRequest, SearchService, ServiceError

logger = logging.getLogger(__name__)

_TRUE_VALUES = {"1", "true", "yes", "on"}
_FALSE_VALUES = {"0", "false", "no", "off", ""}


def _parse_flag(values: list[str], name: str) -> bool:
    raw = values[-1].lower() if values else "0"
    if raw in _TRUE_VALUES:
        return True
    if raw in _FALSE_VALUES:
        return False
    raise RequestError(f"bad boolean for {name!r}: {raw!r}")


def request_from_query_string(qs: dict[str, list[str]]) -> SearchRequest:
    query = qs.get("q", [""])[-1]
    try:
        k = int(qs.get("k", ["60"])[-1])
    except ValueError as exc:
        raise RequestError("k must be an integer") from exc
    return SearchRequest(
        query=query,
        k=k,
        fusion=_parse_flag(qs.get("fusion", []), "fusion"),
        answers=_parse_flag(qs.get("answers", []), "answers"),
        no_cache=_parse_flag(qs.get("no_cache", []), "no_cache"),
    )


class SearchHandler(BaseHTTPRequestHandler):
    service: SearchService  # injected by make_server

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self) -> None:  # noqa: N802 - BaseHTTPRequestHandler API
        parsed = urlparse(self.path)
        if parsed.path == "/health":
            self._send_json(200, self.service.health())
            return
        if parsed.path != "/search":
            self._send_json(404, {"error": "not found"})
            return
        try:
            request = request_from_query_string(parse_qs(parsed.query, keep_blank_values=True))
            result = self.service.handle_search(request)
        except RequestError as exc:
            self._send_json(400, {"error": str(exc)})
            return
        except ServiceError as exc:
            logger.exception("internal error %s", exc.error_id)
            self._send_json(500, {"error": "internal error", "id": exc.error_id})
            return
        except Exception:  # noqa: BLE001 - opaque 500 by contract
            error_id = ServiceError("unhandled").error_id
            logger.exception("internal error %s", error_id)
            self._send_json(500, {"error": "internal error", "id": error_id})
            return
        self._send_json(200, result.to_dict())

    def log_message(self, fmt: str, *args) -> None:
        logger.debug("%s - %s", self.address_string(), fmt % args)


def make_server(service: SearchService, host: str = "127.0.0.1", port: int = 8080) -> ThreadingHTTPServer:
    handler = type("BoundSearchHandler", (SearchHandler,), {"service": service})
    return ThreadingHTTPServer((host, port), handler)


def serve_forever(service: SearchService, host: str = "0.0.0.0", port: int = 8080) -> None:
    server = make_server(service, host, port)
    logger.info("serving on %s:%d", host, server.server_address[1])
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
        server.server_close()


class BackgroundServer:
    """Run the API on a daemon thread; used by tests and the load harness demos."""

    def __init__(self, service: SearchService, host: str = "127.0.0.1", port: int = 0):
        self.server = make_server(service, host, port)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self.server.server_address[:2]
        return f"http://{host}:{port}"

    def __enter__(self) -> "BackgroundServer":
        self.thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self.server.shutdown()
        self.server.server_close()
        self.thread.join(timeout=5)

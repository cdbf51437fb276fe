"""Localhost HTTP service exposing one acquisition session to a browser UI.

Routes (JSON unless noted):
  GET  /api/session/round   open round snapshot (opens the next round if idle)
  POST /api/session/select  {round_id, candidate_id} -> loss + stats + reveal
  GET  /api/session/stats   selection counts, percentages, loss history
  GET  /api/image/{id}      candidate raster (PNG), current or previous round
  GET  /...                 static files for the bundled UI, when configured

Every numeric value in a JSON payload is a decimal string, so clients never
depend on float serialization quirks. Non-2xx responses carry exactly one
error object: {"error": {"code", "message"}}.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .exceptions import (AlbeamError, BadRoundError, SequencingError,
                         UnknownCandidateError)
from .session import ActiveSession, selection_criteria_text

_CONTENT_TYPES = {".html": "text/html; charset=utf-8",
                  ".js": "text/javascript; charset=utf-8",
                  ".css": "text/css; charset=utf-8",
                  ".map": "application/json",
                  ".svg": "image/svg+xml",
                  ".png": "image/png",
                  ".ico": "image/x-icon"}

_FALLBACK_INDEX = b"""<!doctype html>
<meta charset="utf-8"><title>albeam</title>
<p>albeam session server is running. The API lives under <code>/api/</code>;
no UI bundle is configured.</p>
"""


def _error_code(exc: Exception) -> tuple[int, str]:
    if isinstance(exc, BadRoundError):
        return 409, "BAD_ROUND"
    if isinstance(exc, UnknownCandidateError):
        return 404, "UNKNOWN_CANDIDATE"
    if isinstance(exc, SequencingError):
        return 409, "SEQUENCING"
    return 500, "INTERNAL"


class SessionGateway:
    """Server-side state bridging HTTP handlers and the single session."""

    def __init__(self, session: ActiveSession):
        self.session = session
        self._lock = threading.Lock()
        self._round_payload: str | None = None
        self._images: dict[str, bytes] = {}
        self._previous_images: dict[str, bytes] = {}

    def round_snapshot(self) -> str:
        """JSON for the open round, opening one first if none is pending."""
        with self._lock:
            if not self.session.awaiting_selection():
                cset = self.session.next_round()
                self._previous_images = self._images
                self._images = {c.token: c.image_png for c in cset.candidates}
                payload = {
                    "round_id": str(cset.round_id),
                    "state": "awaiting_selection",
                    "criteria": list(selection_criteria_text()),
                    "candidates": [
                        {"id": c.token, "image_url": f"/api/image/{c.token}"}
                        for c in cset.candidates],
                }
                self._round_payload = json.dumps(payload, sort_keys=True)
            return self._round_payload

    def select(self, round_id: int, candidate_id: str) -> str:
        with self._lock:
            cset = self.session.current_candidates()
            if cset is None:
                raise SequencingError("no round is awaiting a selection")
            loss, stats = self.session.submit_selection(round_id, candidate_id)
            hist = self.session.loss_history()
            last = hist[-1]
            revealed = {c.token: c.method_tag.value for c in cset.candidates}
            self._round_payload = None
            payload = {
                "round_id": str(round_id),
                "loss": repr(float(loss)),
                "step_skipped": bool(last["step_skipped"]),
                "stats": stats.to_payload(),
                "revealed": revealed,
            }
            return json.dumps(payload, sort_keys=True)

    def stats_payload(self) -> str:
        stats = self.session.stats()
        hist = [{"round_id": str(h["round_id"]), "loss": repr(float(h["loss"])),
                 "step_skipped": bool(h["step_skipped"])}
                for h in self.session.loss_history()]
        payload = stats.to_payload()
        payload["loss_history"] = hist
        return json.dumps(payload, sort_keys=True)

    def image(self, token: str) -> bytes | None:
        with self._lock:
            return self._images.get(token) or self._previous_images.get(token)


class _Handler(BaseHTTPRequestHandler):
    server_version = "albeam/1"
    gateway: SessionGateway = None  # set by subclassing in serve()
    static_dir: Path | None = None

    def log_message(self, fmt, *args):  # quiet by default
        pass

    # -- plumbing ----------------------------------------------------------

    def _send(self, status: int, body: bytes, ctype: str) -> None:
        self.send_response(status)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Cache-Control", "no-store")
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, status: int, payload: str) -> None:
        self._send(status, payload.encode(), "application/json")

    def _send_error_obj(self, exc: Exception) -> None:
        status, code = _error_code(exc)
        msg = str(exc) if isinstance(exc, AlbeamError) else "internal error"
        body = json.dumps({"error": {"code": code, "message": msg}},
                          sort_keys=True)
        self._send_json(status, body)

    # -- routes ------------------------------------------------------------

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()

    def do_GET(self):
        try:
            path = self.path.split("?", 1)[0]
            if path == "/api/session/round":
                self._send_json(200, self.gateway.round_snapshot())
            elif path == "/api/session/stats":
                self._send_json(200, self.gateway.stats_payload())
            elif path.startswith("/api/image/"):
                token = path[len("/api/image/"):]
                png = self.gateway.image(token)
                if png is None:
                    raise UnknownCandidateError(f"no image for id {token!r}")
                self._send(200, png, "image/png")
            elif path.startswith("/api/"):
                raise UnknownCandidateError(f"no such endpoint {path}")
            else:
                self._serve_static(path)
        except Exception as exc:  # every failure maps to one error object
            self._send_error_obj(exc)

    def do_POST(self):
        try:
            path = self.path.split("?", 1)[0]
            if path != "/api/session/select":
                raise UnknownCandidateError(f"no such endpoint {path}")
            length = int(self.headers.get("Content-Length", "0"))
            try:
                body = json.loads(self.rfile.read(length) or b"{}")
                round_id = int(body["round_id"])
                candidate_id = str(body["candidate_id"])
            except (ValueError, KeyError, TypeError) as exc:
                raise BadRoundError(f"malformed selection body: {exc}") from exc
            self._send_json(200, self.gateway.select(round_id, candidate_id))
        except Exception as exc:
            self._send_error_obj(exc)

    def _serve_static(self, path: str) -> None:
        root = self.static_dir
        if path in ("", "/"):
            path = "/index.html"
        if root is not None:
            target = (root / path.lstrip("/")).resolve()
            if str(target).startswith(str(root.resolve())) and target.is_file():
                ctype = _CONTENT_TYPES.get(target.suffix,
                                           "application/octet-stream")
                self._send(200, target.read_bytes(), ctype)
                return
        if path == "/index.html":
            self._send(200, _FALLBACK_INDEX, "text/html; charset=utf-8")
            return
        body = json.dumps({"error": {"code": "UNKNOWN_CANDIDATE",
                                     "message": f"not found: {path}"}})
        self._send_json(404, body)


class ApiServer:
    """Owns the listening socket and its handler thread."""

    def __init__(self, session: ActiveSession, port: int = 0,
                 static_dir=None, host: str = "127.0.0.1"):
        gateway = SessionGateway(session)
        sdir = Path(static_dir) if static_dir else None

        class Handler(_Handler):
            pass

        Handler.gateway = gateway
        Handler.static_dir = sdir
        self.gateway = gateway
        self.httpd = ThreadingHTTPServer((host, port), Handler)
        self.port = self.httpd.server_address[1]
        self._thread: threading.Thread | None = None

    def start(self) -> "ApiServer":
        self._thread = threading.Thread(target=self.httpd.serve_forever,
                                        name="albeam-http", daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self.httpd.serve_forever()

    def shutdown(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

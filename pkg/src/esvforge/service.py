"""Read-only HTTP service over a TimelineIndex, plus static UI file serving.

Endpoints (all times decimal seconds, bodies JSON):

- ``GET /surgeries`` — surgery ids with labelled durations
- ``GET /surgeries/{id}/timeline`` — all three levels' segments for a surgery
- ``GET /search?phase=&task=&action=&surgery=&from=&to=&min_duration=``

Everything else is served from the configured UI directory (``/`` maps to
``index.html``). Responses are deterministic for a fixed index. The served
index can be swapped atomically with :meth:`IndexServer.swap_index`; readers
never observe a partial index because the reference assignment is atomic.
"""
from __future__ import annotations

import json
import logging
import mimetypes
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlsplit

from .errors import BindFailureError, UnknownLabelNameError
from .index import IndexSegment, SearchQuery, TimelineIndex, search
from .taxonomy import LEVELS, TaxonomyRegistry, default_registry

log = logging.getLogger(__name__)


class IndexServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address: tuple[str, int], index: TimelineIndex,
                 registry: TaxonomyRegistry, ui_dir: Path | None):
        self.index = index
        self.registry = registry
        self.ui_dir = ui_dir
        try:
            super().__init__(address, _Handler)
        except OSError as e:
            raise BindFailureError(f"cannot bind {address[0]}:{address[1]}: {e}") from e

    def swap_index(self, index: TimelineIndex) -> None:
        self.index = index  # single reference assignment; readers see old or new, never partial


def create_server(index: TimelineIndex, bind: str = "127.0.0.1:0",
                  registry: TaxonomyRegistry | None = None,
                  ui_dir: str | Path | None = None) -> IndexServer:
    host, _, port = bind.rpartition(":")
    server = IndexServer((host or "127.0.0.1", int(port)), index,
                         registry or default_registry(),
                         Path(ui_dir) if ui_dir else None)
    return server


def serve_forever(server: IndexServer) -> None:
    host, port = server.server_address[:2]
    log.info("serving timeline index on http://%s:%s/", host, port)
    server.serve_forever()


def start_in_thread(server: IndexServer) -> threading.Thread:
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return thread


def segment_payload(seg: IndexSegment, registry: TaxonomyRegistry) -> dict:
    return {
        "surgery_id": seg.surgery_id,
        "level": seg.level,
        "label_ordinal": seg.label,
        "label": registry.entries(seg.level)[seg.label].name,
        "start_s": seg.start_s,
        "end_s": seg.end_s,
        "source": seg.source,
    }


class _Handler(BaseHTTPRequestHandler):
    server: IndexServer

    def do_GET(self):  # noqa: N802 (http.server API)
        url = urlsplit(self.path)
        parts = [p for p in url.path.split("/") if p]
        try:
            if parts == ["surgeries"]:
                self._send_json(200, self._surgeries())
            elif len(parts) == 3 and parts[0] == "surgeries" and parts[2] == "timeline":
                self._timeline(parts[1])
            elif parts == ["search"]:
                self._search(parse_qs(url.query))
            else:
                self._static(url.path)
        except BrokenPipeError:
            pass
        except Exception:
            log.exception("request failed: %s", self.path)
            self._send_json(500, {"error": "internal error"})

    def _surgeries(self) -> dict:
        index = self.server.index
        return {"surgeries": [
            {"surgery_id": sid, "duration_s": index.durations[sid]}
            for sid in index.surgery_ids()
        ]}

    def _timeline(self, surgery_id: str) -> None:
        index = self.server.index
        if surgery_id not in index.durations:
            self._send_json(404, {"error": f"unknown surgery: {surgery_id}"})
            return
        registry = self.server.registry
        payload = {
            "surgery_id": surgery_id,
            "duration_s": index.durations[surgery_id],
            "levels": {
                level: [segment_payload(s, registry)
                        for s in index.for_surgery(surgery_id, level)]
                for level in LEVELS
            },
        }
        self._send_json(200, payload)

    def _search(self, params: dict[str, list[str]]) -> None:
        def one(key: str) -> str | None:
            values = params.get(key)
            return values[0] if values else None

        try:
            query = SearchQuery(
                phase=one("phase"),
                task=one("task"),
                action=one("action"),
                surgery=one("surgery"),
                from_s=float(one("from")) if one("from") else None,
                to_s=float(one("to")) if one("to") else None,
                min_duration_s=float(one("min_duration") or 0.0),
            )
            results = search(self.server.index, query, self.server.registry)
        except (ValueError, UnknownLabelNameError) as e:
            self._send_json(400, {"error": str(e)})
            return
        registry = self.server.registry
        self._send_json(200, {"results": [segment_payload(s, registry) for s in results]})

    def _static(self, path: str) -> None:
        ui_dir = self.server.ui_dir
        if ui_dir is None:
            self._send_json(404, {"error": "not found"})
            return
        rel = path.lstrip("/") or "index.html"
        target = (ui_dir / rel).resolve()
        if not str(target).startswith(str(ui_dir.resolve())) or not target.is_file():
            self._send_json(404, {"error": "not found"})
            return
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        body = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload, sort_keys=True).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, fmt, *args):  # route through logging, not stderr prints
        log.debug("%s - %s", self.address_string(), fmt % args)

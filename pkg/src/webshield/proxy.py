"""Filtering HTTP forward proxy enforcing network boundary decisions.

Each request (plain HTTP or CONNECT tunnel) is decided before any
upstream traffic: in pre-resolve mode the target is resolved first and a
crossing request is answered 403 without a single byte reaching the
target; in learn-on-reply mode unknown hostnames pass once, their peer
address is recorded from the reply socket, and subsequent requests are
blocked from the cache.

Decisions stream to a JSONL log.  Repeated blocks of the same target
within a short window coalesce into one line carrying a count, so a
page hammering a blocked host does not flood the log.
"""

from __future__ import annotations

import http.client
import json
import select
import socket
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .nbs import (
    AddressClass,
    Decision,
    LearnCache,
    NbsMode,
    classify_address,
    decide,
    observe_reply,
)

BLOCK_REASON_HEADER = "X-Boundary-Block-Reason"
COALESCE_WINDOW_S = 10.0

_HOP_BY_HOP = {
    "connection",
    "proxy-connection",
    "keep-alive",
    "te",
    "trailers",
    "transfer-encoding",
    "upgrade",
    "proxy-authorization",
    "proxy-authenticate",
}


@dataclass
class ProxyConfig:
    listen_host: str = "127.0.0.1"
    listen_port: int = 0
    mode: NbsMode = NbsMode.PRE_RESOLVE
    origin_class: AddressClass = AddressClass.PUBLIC
    log_path: Path | None = None
    upstream_timeout_s: float = 10.0
    coalesce_window_s: float = COALESCE_WINDOW_S


class DecisionLog:
    """JSONL decision log with per-target coalescing of blocks."""

    def __init__(self, path: Path | None, window_s: float = COALESCE_WINDOW_S):
        self._path = Path(path) if path else None
        self._window_s = window_s
        self._lock = threading.Lock()
        self._pending: dict = {}  # key -> {record, count, window_start}
        if self._path:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            self._path.touch()

    def _write(self, record: dict) -> None:
        if not self._path:
            return
        with open(self._path, "a") as f:
            f.write(json.dumps(record) + "\n")

    @staticmethod
    def _record(host: str, cls: str, decision: str, reason: str, coalesced: int) -> dict:
        return {
            "t": datetime.now(timezone.utc).isoformat(),
            "host": host,
            "class": cls,
            "decision": decision,
            "reason": reason,
            "coalesced": coalesced,
        }

    def log(self, host: str, cls: str, decision: str, reason: str) -> None:
        if decision != Decision.BLOCK.value:
            with self._lock:
                self._write(self._record(host, cls, decision, reason, 1))
            return
        now = time.monotonic()
        key = (host, cls)
        with self._lock:
            pending = self._pending.get(key)
            if pending and now - pending["window_start"] < self._window_s:
                pending["count"] += 1
                return
            if pending:
                self._write_pending(key)
            self._pending[key] = {
                "record": self._record(host, cls, decision, reason, 1),
                "count": 1,
                "window_start": now,
            }

    def _write_pending(self, key) -> None:
        pending = self._pending.pop(key, None)
        if pending:
            record = pending["record"]
            record["coalesced"] = pending["count"]
            self._write(record)

    def sweep(self) -> None:
        """Flush block windows whose coalescing interval has expired."""
        now = time.monotonic()
        with self._lock:
            for key in [
                k
                for k, p in self._pending.items()
                if now - p["window_start"] >= self._window_s
            ]:
                self._write_pending(key)

    def flush(self) -> None:
        with self._lock:
            for key in list(self._pending):
                self._write_pending(key)


class _ProxyHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "webshield-nbs"

    # ------------------------------------------------------------------
    # decision plumbing

    @property
    def proxy(self) -> "BoundaryProxy":
        return self.server.boundary_proxy

    def log_message(self, fmt, *args):  # silence default stderr chatter
        pass

    def _split_target(self, netloc: str, default_port: int) -> tuple[str, int]:
        if netloc.startswith("["):  # bracketed IPv6
            host, _, rest = netloc[1:].partition("]")
            port = int(rest[1:]) if rest.startswith(":") else default_port
            return host, port
        host, _, port_text = netloc.partition(":")
        return host, int(port_text) if port_text else default_port

    def _deny(self, host: str, cls: str, reason: str) -> None:
        self.proxy.log.log(host, cls, Decision.BLOCK.value, reason)
        body = reason.encode()
        self.send_response(403)
        self.send_header(BLOCK_REASON_HEADER, reason)
        self.send_header("Content-Type", "text/plain")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Connection", "close")
        self.end_headers()
        self.wfile.write(body)

    def _bad_gateway(self, host: str, message: str) -> None:
        body = message.encode()
        self.send_response(502)
        self.send_header("Content-Type", "text/plain")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Connection", "close")
        self.end_headers()
        self.wfile.write(body)

    def _resolve(self, host: str, port: int) -> list:
        infos = socket.getaddrinfo(host, port, type=socket.SOCK_STREAM)
        # prefer IPv4 so loopback tests hit 127.0.0.1 deterministically
        infos.sort(key=lambda info: info[0] != socket.AF_INET)
        return [info[4] for info in infos]

    def _gate(self, host: str, port: int):
        """Run the boundary decision for a target.

        Returns (connect_address_or_None, learned_hostname_or_None);
        None address means the response has already been sent.
        """
        proxy = self.proxy
        if proxy.config.mode is NbsMode.PRE_RESOLVE:
            try:
                addrs = self._resolve(host, port)
            except OSError as exc:
                self._bad_gateway(host, f"resolver failure for {host!r}: {exc}")
                return None, None
            for addr in addrs:
                decision = decide(
                    NbsMode.PRE_RESOLVE, proxy.config.origin_class, host, addr[0]
                )
                if decision.value is Decision.BLOCK:
                    self._deny(host, classify_address(addr[0]).value, decision.reason)
                    return None, None
            first = addrs[0]
            proxy.log.log(
                host,
                classify_address(first[0]).value,
                Decision.ALLOW.value,
                f"no boundary crossing for {host!r}",
            )
            return (first[0], first[1]), None

        decision = decide(
            NbsMode.LEARN_ON_REPLY,
            proxy.config.origin_class,
            host,
            None,
            proxy.cache,
        )
        cls = self._target_class(host)
        if decision.value is Decision.BLOCK:
            self._deny(host, cls, decision.reason)
            return None, None
        learned = host if decision.value is Decision.ALLOW_AND_LEARN else None
        proxy.log.log(host, cls, decision.value.value, decision.reason)
        return (host, port), learned

    def _target_class(self, host: str) -> str:
        """Best-known class string: literal address, learned entry, or unknown."""
        try:
            return classify_address(host.strip("[]")).value
        except ValueError:
            cached = self.proxy.cache.lookup(host)
            return cached.value if cached else "unknown"

    def _learn_peer(self, sock: socket.socket, hostname: str | None) -> None:
        if hostname is None:
            return
        try:
            peer = sock.getpeername()[0]
        except OSError:
            return
        observe_reply(self.proxy.cache, hostname, peer)

    # ------------------------------------------------------------------
    # plain HTTP forwarding

    def _handle_http(self):
        from urllib.parse import urlsplit

        if not self.path.startswith(("http://", "https://")):
            body = b"proxy requires absolute-form request targets"
            self.send_response(400)
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Connection", "close")
            self.end_headers()
            self.wfile.write(body)
            return
        parts = urlsplit(self.path)
        host, port = self._split_target(parts.netloc, 80)
        connect_addr, learn_host = self._gate(host, port)
        if connect_addr is None:
            return

        origin_path = parts.path or "/"
        if parts.query:
            origin_path += "?" + parts.query
        length = int(self.headers.get("Content-Length", 0) or 0)
        body = self.rfile.read(length) if length else None

        conn = http.client.HTTPConnection(
            connect_addr[0], connect_addr[1], timeout=self.proxy.config.upstream_timeout_s
        )
        try:
            conn.connect()
            self._learn_peer(conn.sock, learn_host)
            conn.putrequest(self.command, origin_path, skip_host=True, skip_accept_encoding=True)
            sent_host = False
            for name, value in self.headers.items():
                if name.lower() in _HOP_BY_HOP:
                    continue
                if name.lower() == "host":
                    sent_host = True
                conn.putheader(name, value)
            if not sent_host:
                conn.putheader("Host", parts.netloc)
            conn.putheader("Connection", "close")
            conn.endheaders(body)
            response = conn.getresponse()
            payload = response.read()
        except OSError as exc:
            self._bad_gateway(host, f"upstream connection failed: {exc}")
            return
        finally:
            conn.close()

        self.send_response(response.status, response.reason)
        for name, value in response.getheaders():
            if name.lower() in _HOP_BY_HOP or name.lower() == "content-length":
                continue
            self.send_header(name, value)
        self.send_header("Content-Length", str(len(payload)))
        self.send_header("Connection", "close")
        self.end_headers()
        self.wfile.write(payload)

    do_GET = _handle_http
    do_POST = _handle_http
    do_PUT = _handle_http
    do_DELETE = _handle_http
    do_HEAD = _handle_http
    do_OPTIONS = _handle_http
    do_PATCH = _handle_http

    # ------------------------------------------------------------------
    # CONNECT tunneling

    def do_CONNECT(self):
        host, port = self._split_target(self.path, 443)
        connect_addr, learn_host = self._gate(host, port)
        if connect_addr is None:
            return
        try:
            upstream = socket.create_connection(
                connect_addr, timeout=self.proxy.config.upstream_timeout_s
            )
        except OSError as exc:
            self._bad_gateway(host, f"upstream connection failed: {exc}")
            return
        self._learn_peer(upstream, learn_host)
        self.send_response(200, "Connection Established")
        self.send_header("Connection", "close")
        self.end_headers()
        self._pump(self.connection, upstream)

    def _pump(self, client: socket.socket, upstream: socket.socket) -> None:
        upstream.settimeout(None)
        client.settimeout(None)
        sockets = [client, upstream]
        try:
            while True:
                readable, _, _ = select.select(sockets, [], [], 30.0)
                if not readable:
                    break
                for sock in readable:
                    data = sock.recv(65536)
                    if not data:
                        return
                    (upstream if sock is client else client).sendall(data)
        except OSError:
            pass
        finally:
            upstream.close()
            self.close_connection = True


class BoundaryProxy:
    """Long-running filtering proxy service."""

    def __init__(self, config: ProxyConfig):
        self.config = config
        self.cache = LearnCache()
        self.log = DecisionLog(config.log_path, config.coalesce_window_s)
        self._server = ThreadingHTTPServer(
            (config.listen_host, config.listen_port), _ProxyHandler
        )
        self._server.daemon_threads = True
        self._server.boundary_proxy = self
        self._thread: threading.Thread | None = None
        self._sweeper = threading.Thread(target=self._sweep_loop, daemon=True)
        self._stopping = threading.Event()

    @property
    def address(self) -> tuple[str, int]:
        host, port = self._server.server_address[:2]
        return host, port

    def _sweep_loop(self) -> None:
        while not self._stopping.wait(0.5):
            self.log.sweep()

    def start(self) -> "BoundaryProxy":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        self._sweeper.start()
        return self

    def serve_forever(self) -> None:
        self._sweeper.start()
        try:
            self._server.serve_forever()
        finally:
            self.log.flush()

    def stop(self) -> None:
        self._stopping.set()
        self._server.shutdown()
        self._server.server_close()
        if self._thread:
            self._thread.join(timeout=5)
        self.log.flush()


def run_proxy(config: ProxyConfig) -> BoundaryProxy:
    """Bind and start the proxy in background threads; caller stops it."""
    return BoundaryProxy(config).start()

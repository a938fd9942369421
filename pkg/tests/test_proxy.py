"""Integration tests for the filtering forward proxy.

A counting stub server stands in for the local target; the zero-leak
checks assert that blocked requests never open a connection to it.
"""

import http.client
import json
import socket
import threading
import time

import pytest

from webshield.nbs import AddressClass, NbsMode
from webshield.proxy import BLOCK_REASON_HEADER, ProxyConfig, run_proxy


class CountingStub:
    """Minimal HTTP server on loopback that counts accepted connections."""

    def __init__(self):
        self.sock = socket.socket()
        self.sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self.sock.bind(("127.0.0.1", 0))
        self.sock.listen(8)
        self.port = self.sock.getsockname()[1]
        self.connections = 0
        self._thread = threading.Thread(target=self._serve, daemon=True)
        self._thread.start()

    def _serve(self):
        while True:
            try:
                conn, _ = self.sock.accept()
            except OSError:
                return
            self.connections += 1
            try:
                conn.settimeout(5)
                conn.recv(65536)
                body = b"stub-ok"
                conn.sendall(
                    b"HTTP/1.1 200 OK\r\nContent-Length: "
                    + str(len(body)).encode()
                    + b"\r\nConnection: close\r\n\r\n"
                    + body
                )
            except OSError:
                pass
            finally:
                conn.close()

    def close(self):
        self.sock.close()


@pytest.fixture
def stub():
    server = CountingStub()
    yield server
    server.close()


def proxy_request(proxy_addr, url, method="GET"):
    conn = http.client.HTTPConnection(*proxy_addr, timeout=10)
    try:
        conn.request(method, url)
        response = conn.getresponse()
        return response.status, dict(response.getheaders()), response.read()
    finally:
        conn.close()


class TestPreResolveMode:
    def test_loopback_target_blocked_with_zero_bytes_sent(self, stub, tmp_path):
        log = tmp_path / "decisions.jsonl"
        proxy = run_proxy(ProxyConfig(mode=NbsMode.PRE_RESOLVE, log_path=log))
        try:
            status, headers, _ = proxy_request(
                proxy.address, f"http://127.0.0.1:{stub.port}/probe"
            )
            assert status == 403
            assert BLOCK_REASON_HEADER in headers
            assert stub.connections == 0
        finally:
            proxy.stop()
        records = [json.loads(line) for line in log.read_text().splitlines()]
        assert any(r["decision"] == "Block" and r["class"] == "loopback" for r in records)

    def test_hostname_resolving_to_loopback_blocked(self, stub):
        proxy = run_proxy(ProxyConfig(mode=NbsMode.PRE_RESOLVE))
        try:
            status, _, _ = proxy_request(
                proxy.address, f"http://localhost:{stub.port}/probe"
            )
            assert status == 403
            assert stub.connections == 0
        finally:
            proxy.stop()

    def test_connect_tunnel_blocked(self, stub):
        proxy = run_proxy(ProxyConfig(mode=NbsMode.PRE_RESOLVE))
        try:
            conn = http.client.HTTPConnection(*proxy.address, timeout=10)
            conn.set_tunnel("127.0.0.1", stub.port)
            with pytest.raises(OSError):
                conn.request("GET", "/")
            conn.close()
            assert stub.connections == 0
        finally:
            proxy.stop()

    def test_non_crossing_request_passes_through(self, stub):
        proxy = run_proxy(
            ProxyConfig(mode=NbsMode.PRE_RESOLVE, origin_class=AddressClass.LOOPBACK)
        )
        try:
            status, _, body = proxy_request(
                proxy.address, f"http://127.0.0.1:{stub.port}/ok"
            )
            assert status == 200
            assert body == b"stub-ok"
            assert stub.connections == 1
        finally:
            proxy.stop()

    def test_connect_tunnel_allowed_when_not_crossing(self, stub):
        proxy = run_proxy(
            ProxyConfig(mode=NbsMode.PRE_RESOLVE, origin_class=AddressClass.LOOPBACK)
        )
        try:
            conn = http.client.HTTPConnection(*proxy.address, timeout=10)
            conn.set_tunnel("127.0.0.1", stub.port)
            conn.request("GET", "/tunnel")
            response = conn.getresponse()
            assert response.status == 200
            assert response.read() == b"stub-ok"
            conn.close()
        finally:
            proxy.stop()

    def test_unresolvable_host_is_bad_gateway(self):
        proxy = run_proxy(ProxyConfig(mode=NbsMode.PRE_RESOLVE))
        try:
            status, _, body = proxy_request(
                proxy.address, "http://no-such-host.invalid/x"
            )
            assert status == 502
            assert b"resolver failure" in body
        finally:
            proxy.stop()

    def test_upstream_connect_failure_is_bad_gateway(self):
        # a loopback port with no listener, reached from a loopback origin
        closed = socket.socket()
        closed.bind(("127.0.0.1", 0))
        port = closed.getsockname()[1]
        closed.close()
        proxy = run_proxy(
            ProxyConfig(mode=NbsMode.PRE_RESOLVE, origin_class=AddressClass.LOOPBACK)
        )
        try:
            status, _, body = proxy_request(proxy.address, f"http://127.0.0.1:{port}/x")
            assert status == 502
            assert b"upstream connection failed" in body
        finally:
            proxy.stop()


class TestLearnOnReplyMode:
    def test_first_passes_then_blocked(self, stub):
        proxy = run_proxy(ProxyConfig(mode=NbsMode.LEARN_ON_REPLY))
        try:
            status1, _, body1 = proxy_request(
                proxy.address, f"http://localhost:{stub.port}/one"
            )
            assert status1 == 200
            assert body1 == b"stub-ok"
            assert stub.connections == 1
            status2, headers2, _ = proxy_request(
                proxy.address, f"http://localhost:{stub.port}/two"
            )
            assert status2 == 403
            assert stub.connections == 1
            assert "loopback" in headers2[BLOCK_REASON_HEADER]
        finally:
            proxy.stop()

    def test_literal_ip_blocked_without_learning_phase(self, stub):
        proxy = run_proxy(ProxyConfig(mode=NbsMode.LEARN_ON_REPLY))
        try:
            status, _, _ = proxy_request(
                proxy.address, f"http://127.0.0.1:{stub.port}/direct"
            )
            assert status == 403
            assert stub.connections == 0
        finally:
            proxy.stop()


class TestDecisionLog:
    def test_blocks_coalesce_within_window(self, stub, tmp_path):
        log = tmp_path / "coalesced.jsonl"
        proxy = run_proxy(
            ProxyConfig(mode=NbsMode.PRE_RESOLVE, log_path=log, coalesce_window_s=10.0)
        )
        try:
            for _ in range(3):
                status, _, _ = proxy_request(
                    proxy.address, f"http://127.0.0.1:{stub.port}/spam"
                )
                assert status == 403
        finally:
            proxy.stop()  # flushes pending windows
        records = [json.loads(line) for line in log.read_text().splitlines()]
        blocks = [r for r in records if r["decision"] == "Block"]
        assert len(blocks) == 1
        assert blocks[0]["coalesced"] == 3
        assert blocks[0]["host"] == "127.0.0.1"

    def test_sweeper_flushes_expired_window(self, stub, tmp_path):
        log = tmp_path / "swept.jsonl"
        proxy = run_proxy(
            ProxyConfig(mode=NbsMode.PRE_RESOLVE, log_path=log, coalesce_window_s=0.6)
        )
        try:
            status, _, _ = proxy_request(
                proxy.address, f"http://127.0.0.1:{stub.port}/once"
            )
            assert status == 403
            deadline = time.time() + 5.0
            while time.time() < deadline:
                lines = [l for l in log.read_text().splitlines() if l]
                if any(json.loads(l)["decision"] == "Block" for l in lines):
                    break
                time.sleep(0.2)
            else:
                pytest.fail("sweeper never flushed the block window")
        finally:
            proxy.stop()

    def test_log_line_schema(self, stub, tmp_path):
        log = tmp_path / "schema.jsonl"
        proxy = run_proxy(
            ProxyConfig(
                mode=NbsMode.PRE_RESOLVE,
                origin_class=AddressClass.LOOPBACK,
                log_path=log,
            )
        )
        try:
            proxy_request(proxy.address, f"http://127.0.0.1:{stub.port}/ok")
        finally:
            proxy.stop()
        record = json.loads(log.read_text().splitlines()[0])
        assert set(record) == {"t", "host", "class", "decision", "reason", "coalesced"}
        assert record["decision"] == "Allow"
        assert record["coalesced"] == 1

"""Headless-browser control over the DevTools wire protocol.

Self-contained: a minimal RFC 6455 websocket client over a plain socket
plus the handful of protocol calls the capture loop needs (navigate,
evaluate, screenshot). No browser automation dependency.
"""

from __future__ import annotations

import base64
import json
import os
import re
import secrets
import shutil
import socket
import struct
import subprocess
import time
from urllib.parse import urlparse

from .errors import SandboxError

BROWSER_CANDIDATES = (
    "chromium",
    "chromium-browser",
    "google-chrome",
    "google-chrome-stable",
    "chrome",
    "headless-shell",
)


def find_browser() -> str | None:
    env = os.environ.get("FESYNTH_BROWSER")
    if env and shutil.which(env):
        return shutil.which(env)
    for name in BROWSER_CANDIDATES:
        path = shutil.which(name)
        if path:
            return path
    return None


class WebSocket:
    """Client-side websocket: handshake, masked sends, fragmented reads."""

    def __init__(self, url: str, timeout: float = 30.0):
        parsed = urlparse(url)
        if parsed.scheme != "ws":
            raise SandboxError(f"unsupported websocket scheme in {url}")
        self.timeout = timeout
        self.sock = socket.create_connection(
            (parsed.hostname, parsed.port or 80), timeout=timeout
        )
        self._buffer = b""
        self._handshake(parsed.hostname, parsed.port, parsed.path or "/")

    def _handshake(self, host: str, port: int | None, path: str) -> None:
        key = base64.b64encode(secrets.token_bytes(16)).decode()
        request = (
            f"GET {path} HTTP/1.1\r\n"
            f"Host: {host}:{port or 80}\r\n"
            "Upgrade: websocket\r\n"
            "Connection: Upgrade\r\n"
            f"Sec-WebSocket-Key: {key}\r\n"
            "Sec-WebSocket-Version: 13\r\n\r\n"
        )
        self.sock.sendall(request.encode())
        response = b""
        while b"\r\n\r\n" not in response:
            chunk = self.sock.recv(4096)
            if not chunk:
                raise SandboxError("websocket handshake: connection closed")
            response += chunk
        head, _, rest = response.partition(b"\r\n\r\n")
        if b" 101 " not in head.split(b"\r\n", 1)[0]:
            raise SandboxError(f"websocket handshake rejected: {head[:200]!r}")
        self._buffer = rest

    def _read_exact(self, n: int) -> bytes:
        while len(self._buffer) < n:
            chunk = self.sock.recv(65536)
            if not chunk:
                raise SandboxError("websocket closed mid-frame")
            self._buffer += chunk
        out, self._buffer = self._buffer[:n], self._buffer[n:]
        return out

    def send_text(self, payload: str) -> None:
        data = payload.encode("utf-8")
        mask = secrets.token_bytes(4)
        header = bytearray([0x81])  # FIN + text
        n = len(data)
        if n < 126:
            header.append(0x80 | n)
        elif n < 1 << 16:
            header.append(0x80 | 126)
            header += struct.pack(">H", n)
        else:
            header.append(0x80 | 127)
            header += struct.pack(">Q", n)
        header += mask
        masked = bytes(b ^ mask[i % 4] for i, b in enumerate(data))
        self.sock.sendall(bytes(header) + masked)

    def _send_control(self, opcode: int, payload: bytes = b"") -> None:
        mask = secrets.token_bytes(4)
        frame = bytearray([0x80 | opcode, 0x80 | len(payload)])
        frame += mask
        frame += bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
        self.sock.sendall(bytes(frame))

    def recv_text(self) -> str:
        message = b""
        while True:
            b0, b1 = self._read_exact(2)
            fin = b0 & 0x80
            opcode = b0 & 0x0F
            length = b1 & 0x7F
            if length == 126:
                (length,) = struct.unpack(">H", self._read_exact(2))
            elif length == 127:
                (length,) = struct.unpack(">Q", self._read_exact(8))
            payload = self._read_exact(length)
            if opcode == 9:  # ping
                self._send_control(10, payload)
                continue
            if opcode == 10:  # pong
                continue
            if opcode == 8:  # close
                raise SandboxError("websocket closed by peer")
            message += payload
            if fin:
                return message.decode("utf-8")

    def close(self) -> None:
        try:
            self._send_control(8)
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass


class CdpClient:
    """Small command/response layer over one DevTools connection."""

    def __init__(self, ws_url: str, timeout: float = 30.0):
        self.ws = WebSocket(ws_url, timeout=timeout)
        self.timeout = timeout
        self._next_id = 0
        self.events: list[dict] = []

    def call(self, method: str, params: dict | None = None, session_id: str | None = None) -> dict:
        self._next_id += 1
        message: dict = {"id": self._next_id, "method": method, "params": params or {}}
        if session_id:
            message["sessionId"] = session_id
        self.ws.send_text(json.dumps(message))
        deadline = time.monotonic() + self.timeout
        while time.monotonic() < deadline:
            raw = json.loads(self.ws.recv_text())
            if raw.get("id") == self._next_id:
                if "error" in raw:
                    raise SandboxError(f"{method} failed: {raw['error']}")
                return raw.get("result", {})
            self.events.append(raw)
        raise SandboxError(f"{method}: no response within {self.timeout}s")

    def close(self) -> None:
        self.ws.close()


_DEVTOOLS_LINE = re.compile(r"DevTools listening on (ws://\S+)")


class HeadlessBrowser:
    """One headless browser process driving one page at a time."""

    def __init__(self, binary: str | None = None, viewport=(1280, 720), launch_timeout: float = 30.0):
        self.binary = binary or find_browser()
        if not self.binary:
            raise SandboxError("no headless browser binary found")
        self.viewport = viewport
        self.process = subprocess.Popen(
            [
                self.binary,
                "--headless=new",
                "--remote-debugging-port=0",
                "--no-sandbox",
                "--disable-gpu",
                "--disable-dev-shm-usage",
                "--hide-scrollbars",
                "--force-device-scale-factor=1",
                f"--window-size={viewport[0]},{viewport[1]}",
                "about:blank",
            ],
            stdout=subprocess.DEVNULL,
            stderr=subprocess.PIPE,
            text=True,
        )
        ws_url = None
        deadline = time.monotonic() + launch_timeout
        assert self.process.stderr is not None
        while time.monotonic() < deadline:
            line = self.process.stderr.readline()
            if not line:
                break
            m = _DEVTOOLS_LINE.search(line)
            if m:
                ws_url = m.group(1)
                break
        if not ws_url:
            self.terminate()
            raise SandboxError("browser did not announce its DevTools endpoint")
        self.client = CdpClient(ws_url)
        target = self.client.call("Target.createTarget", {"url": "about:blank"})
        attach = self.client.call(
            "Target.attachToTarget", {"targetId": target["targetId"], "flatten": True}
        )
        self.session = attach["sessionId"]
        self._page("Page.enable")
        self._page("Runtime.enable")
        self._page(
            "Emulation.setDeviceMetricsOverride",
            {
                "width": viewport[0],
                "height": viewport[1],
                "deviceScaleFactor": 1,
                "mobile": False,
            },
        )

    def _page(self, method: str, params: dict | None = None) -> dict:
        return self.client.call(method, params, session_id=self.session)

    def navigate(self, url: str) -> None:
        self._page("Page.navigate", {"url": url})

    def evaluate(self, expression: str):
        result = self._page(
            "Runtime.evaluate",
            {"expression": expression, "returnByValue": True, "awaitPromise": True},
        )
        if "exceptionDetails" in result:
            raise SandboxError(f"evaluate failed: {result['exceptionDetails'].get('text')}")
        return result.get("result", {}).get("value")

    def disable_animations(self) -> None:
        self.evaluate(
            "(() => { const s = document.createElement('style');"
            " s.textContent = '*,*::before,*::after{animation:none!important;"
            "transition:none!important;caret-color:transparent!important}';"
            " document.head.appendChild(s); return true; })()"
        )

    def screenshot_png(self) -> bytes:
        result = self._page("Page.captureScreenshot", {"format": "png"})
        return base64.b64decode(result["data"])

    def terminate(self) -> None:
        try:
            if hasattr(self, "client"):
                self.client.close()
        except Exception:
            pass
        if self.process.poll() is None:
            self.process.terminate()
            try:
                self.process.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.process.kill()

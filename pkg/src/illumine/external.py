"""Subprocess protocol for plugging in real systems under test.

Line-delimited JSON over the child's standard streams, one request per line,
one response per line, strictly in order:

    {"type": "classify", "image": [784 ints 0..255]}
        -> {"confidences": [10 reals]}
    {"type": "drive", "road": {"control_points": [[x, y], ...], "lane_width": w}}
        -> {"steering": [...], "lateral": [...], "dt": 0.1, "completed": bool}

Any malformed response, unsolicited output, timeout or child exit raises
ProtocolError; the caller discards the individual and logs the failure.
"""
from __future__ import annotations

import json
import queue
import subprocess
import threading

import numpy as np

from .driver import SimulationTrace
from .errors import ProtocolError

DEFAULT_TIMEOUT = 60.0


class ExternalSUT:
    """Owns one child process speaking the line protocol."""

    def __init__(self, command: list[str], timeout: float = DEFAULT_TIMEOUT):
        self.command = list(command)
        self.timeout = timeout
        self._proc = subprocess.Popen(
            self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL, text=True, bufsize=1,
        )
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)  # EOF sentinel

    def _request(self, payload: dict) -> dict:
        if self._proc.poll() is not None:
            raise ProtocolError(f"SUT process exited with code {self._proc.returncode}")
        if not self._lines.empty():
            raise ProtocolError("unsolicited response from SUT (out of order)")
        try:
            assert self._proc.stdin is not None
            self._proc.stdin.write(json.dumps(payload) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise ProtocolError(f"SUT pipe closed: {e}") from e
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise ProtocolError(f"SUT response timeout after {self.timeout}s") from None
        if line is None:
            raise ProtocolError("SUT closed its output stream")
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as e:
            raise ProtocolError(f"malformed SUT response: {e}") from e
        if not isinstance(doc, dict):
            raise ProtocolError("SUT response is not a JSON object")
        return doc

    def classify(self, image: np.ndarray) -> np.ndarray:
        flat = np.asarray(image, dtype=np.uint8).reshape(-1)
        if flat.size != 784:
            raise ValueError("classify expects a 28x28 image")
        doc = self._request({"type": "classify", "image": [int(v) for v in flat]})
        conf = doc.get("confidences")
        if not isinstance(conf, list) or len(conf) != 10:
            raise ProtocolError(f"expected 10 confidences, got {conf!r:.80}")
        try:
            arr = np.asarray(conf, dtype=float)
        except (TypeError, ValueError) as e:
            raise ProtocolError(f"non-numeric confidences: {e}") from e
        return arr

    def drive(self, road_json: dict) -> SimulationTrace:
        doc = self._request({"type": "drive", "road": road_json})
        try:
            steering = np.asarray(doc["steering"], dtype=float)
            lateral = np.asarray(doc["lateral"], dtype=float)
            dt = float(doc["dt"])
            completed = bool(doc["completed"])
        except (KeyError, TypeError, ValueError) as e:
            raise ProtocolError(f"bad drive response: {e}") from e
        if steering.shape != lateral.shape or steering.ndim != 1 or steering.size == 0:
            raise ProtocolError("steering/lateral must be equal-length non-empty sequences")
        return SimulationTrace(steering, lateral, completed, dt)

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                if self._proc.stdin is not None:
                    self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self) -> "ExternalSUT":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

"""Resolve frame indices to JPEG images for network backends.

Frames come from pre-extracted directories laid out as
``<root>/<video_id>/frame_%06d.jpg`` (zero-based) next to a ``meta.json``
holding ``{"total_frames": ..., "fps": ...}``, or from an external decoder
command that writes one image to stdout.
"""

from __future__ import annotations

import base64
import io
import json
import shlex
import subprocess
import threading
from collections import OrderedDict
from concurrent.futures import Future
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from PIL import Image

from .domain import VideoSource
from .errors import ConfigError, FrameError

FRAME_NAME = "frame_{:06d}.jpg"


@dataclass(frozen=True)
class EncodedFrame:
    index: int
    timestamp: float
    data: Optional[str]  # base64 JPEG

    @property
    def data_url(self) -> str:
        return f"data:image/jpeg;base64,{self.data}"


def load_video(root: str | Path, video_id: str) -> VideoSource:
    meta_path = Path(root) / video_id / "meta.json"
    try:
        meta = json.loads(meta_path.read_text())
        return VideoSource(video_id, int(meta["total_frames"]), float(meta["fps"]))
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"{meta_path}: {exc}") from exc


class FrameStore:
    """Thread-safe, byte-budgeted LRU cache in front of a frame source.

    Concurrent requests for the same missing frame share one load.
    """

    KINDS = ("directory", "external_command", "synthetic")

    def __init__(
        self,
        kind: str = "synthetic",
        root: Optional[str | Path] = None,
        command: Optional[str] = None,
        cache_budget: int = 64 * 2**20,
        jpeg_quality: int = 85,
        max_edge: int = 768,
        command_timeout: float = 60.0,
    ):
        if kind not in self.KINDS:
            raise ConfigError(f"unknown frame store kind {kind!r}")
        if kind == "directory" and root is None:
            raise ConfigError("directory frame store needs a root")
        if kind == "external_command" and not command:
            raise ConfigError("external_command frame store needs a command template")
        self.kind = kind
        self.root = Path(root) if root is not None else None
        self.command = command
        self.cache_budget = cache_budget
        self.jpeg_quality = jpeg_quality
        self.max_edge = max_edge
        self.command_timeout = command_timeout

        self._cache: OrderedDict[tuple[str, int], str] = OrderedDict()
        self._cache_bytes = 0
        self._inflight: dict[tuple[str, int], Future] = {}
        self._lock = threading.Lock()
        self._placeholder: Optional[str] = None
        self.hits = 0
        self.misses = 0

    @classmethod
    def directory(cls, root: str | Path, **kwargs) -> "FrameStore":
        return cls("directory", root=root, **kwargs)

    @classmethod
    def external(cls, command: str, **kwargs) -> "FrameStore":
        return cls("external_command", command=command, **kwargs)

    def frame_path(self, video: VideoSource, index: int) -> Path:
        return self.root / video.id / FRAME_NAME.format(index)

    def validate(self, video: VideoSource) -> None:
        """Check that every frame file of ``video`` exists (directory kind only)."""
        if self.kind != "directory":
            return
        missing = [i for i in range(video.total_frames) if not self.frame_path(video, i).is_file()]
        if missing:
            raise ConfigError(f"video {video.id}: {len(missing)} frame files missing, first is {missing[0]}")

    def resolve(self, video: VideoSource, indices: Sequence[int]) -> list[EncodedFrame]:
        out = []
        for index in indices:
            if not 0 <= index < video.total_frames:
                raise FrameError(index, f"outside [0, {video.total_frames})")
            out.append(EncodedFrame(index, video.timestamp(index), self._get(video, index)))
        return out

    def _get(self, video: VideoSource, index: int) -> str:
        if self.kind == "synthetic":
            with self._lock:
                if self._placeholder is None:
                    self._placeholder = _encode_placeholder()
                return self._placeholder

        key = (video.id, index)
        with self._lock:
            if key in self._cache:
                self._cache.move_to_end(key)
                self.hits += 1
                return self._cache[key]
            future = self._inflight.get(key)
            owner = future is None
            if owner:
                future = self._inflight[key] = Future()
                self.misses += 1
        if not owner:
            return future.result()

        try:
            data = self._encode(self._load(video, index), index)
        except Exception as exc:
            with self._lock:
                del self._inflight[key]
            future.set_exception(exc)
            raise
        with self._lock:
            del self._inflight[key]
            self._store(key, data)
        future.set_result(data)
        return data

    def _store(self, key: tuple[str, int], data: str) -> None:
        size = len(data)
        if size > self.cache_budget:
            return
        self._cache[key] = data
        self._cache_bytes += size
        while self._cache_bytes > self.cache_budget:
            _, evicted = self._cache.popitem(last=False)
            self._cache_bytes -= len(evicted)

    def _load(self, video: VideoSource, index: int) -> bytes:
        if self.kind == "directory":
            path = self.frame_path(video, index)
            try:
                return path.read_bytes()
            except OSError as exc:
                raise FrameError(index, f"cannot read {path}: {exc.strerror}") from exc
        argv = [part.format(video=video.id, index=index) for part in shlex.split(self.command)]
        try:
            proc = subprocess.run(argv, capture_output=True, timeout=self.command_timeout)
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise FrameError(index, f"decoder command failed: {exc}") from exc
        if proc.returncode != 0 or not proc.stdout:
            raise FrameError(index, f"decoder exited with {proc.returncode}: {proc.stderr.decode(errors='replace')[:200]}")
        return proc.stdout

    def _encode(self, raw: bytes, index: int) -> str:
        try:
            with Image.open(io.BytesIO(raw)) as img:
                img = img.convert("RGB")
                img.thumbnail((self.max_edge, self.max_edge))
                buf = io.BytesIO()
                img.save(buf, format="JPEG", quality=self.jpeg_quality)
        except (OSError, ValueError) as exc:
            raise FrameError(index, f"undecodable image: {exc}") from exc
        return base64.b64encode(buf.getvalue()).decode("ascii")


def _encode_placeholder() -> str:
    buf = io.BytesIO()
    Image.new("RGB", (16, 16), (128, 128, 128)).save(buf, format="JPEG")
    return base64.b64encode(buf.getvalue()).decode("ascii")

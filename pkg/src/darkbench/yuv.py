"""Raw planar YUV 4:2:0 reading, writing and normalization.

Samples are held as ``uint16`` for both 8- and 10-bit content. 10-bit files
store each sample as a little-endian 16-bit word with the top six bits zero.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import (
    CorruptSampleError,
    FormatMismatchError,
    FrameRangeError,
    ZeroFrameError,
)

PLANES = ("y", "u", "v")


def parse_fps(value) -> Fraction:
    """Parse ``"30000/1001"``, ``"60"``, ``"29.97"``, a number or a Fraction."""
    if isinstance(value, Fraction):
        fps = value
    elif isinstance(value, (int, float)):
        fps = Fraction(value).limit_denominator(1_000_000)
    else:
        text = str(value).strip().replace(":", "/")
        try:
            fps = Fraction(text)
        except (ValueError, ZeroDivisionError) as exc:
            raise FormatMismatchError(f"bad frame rate {value!r}") from exc
    if fps <= 0:
        raise FormatMismatchError(f"frame rate must be positive, got {value!r}")
    return fps


@dataclass(frozen=True)
class VideoFormat:
    width: int
    height: int
    bit_depth: int = 8
    fps_num: int = 30
    fps_den: int = 1
    frame_count: int = 0
    chroma: str = "420"

    def __post_init__(self):
        if self.chroma != "420":
            raise FormatMismatchError(f"only 4:2:0 is supported, got {self.chroma!r}")
        if self.width <= 0 or self.height <= 0 or self.width % 2 or self.height % 2:
            raise FormatMismatchError(
                f"4:2:0 needs positive even dimensions, got {self.width}x{self.height}"
            )
        if self.bit_depth not in (8, 10):
            raise FormatMismatchError(f"bit depth must be 8 or 10, got {self.bit_depth}")
        if self.fps_num <= 0 or self.fps_den <= 0:
            raise FormatMismatchError("fps numerator and denominator must be positive")
        if self.frame_count < 0:
            raise FormatMismatchError("frame_count must be >= 0")

    @classmethod
    def from_fps(cls, width, height, bit_depth=8, fps="30", frame_count=0):
        f = parse_fps(fps)
        return cls(width, height, bit_depth, f.numerator, f.denominator, frame_count)

    @property
    def fps(self) -> Fraction:
        return Fraction(self.fps_num, self.fps_den)

    @property
    def fps_text(self) -> str:
        return f"{self.fps_num}/{self.fps_den}" if self.fps_den != 1 else str(self.fps_num)

    @property
    def peak(self) -> int:
        return (1 << self.bit_depth) - 1

    @property
    def bytes_per_sample(self) -> int:
        return 1 if self.bit_depth == 8 else 2

    @property
    def luma_shape(self):
        return (self.height, self.width)

    @property
    def chroma_shape(self):
        return (self.height // 2, self.width // 2)

    def plane_shape(self, plane):
        return self.luma_shape if plane == "y" else self.chroma_shape

    def with_frames(self, n) -> "VideoFormat":
        return replace(self, frame_count=int(n))

    def same_geometry(self, other: "VideoFormat") -> bool:
        return (self.width, self.height, self.bit_depth) == (other.width, other.height, other.bit_depth)

    def to_dict(self):
        return {
            "width": self.width,
            "height": self.height,
            "bit_depth": self.bit_depth,
            "fps": self.fps_text,
            "frame_count": self.frame_count,
        }


def frame_size_bytes(fmt: VideoFormat) -> int:
    samples = fmt.width * fmt.height + 2 * (fmt.width // 2) * (fmt.height // 2)
    return samples * fmt.bytes_per_sample


@dataclass(eq=False)
class Frame:
    y: np.ndarray
    u: np.ndarray
    v: np.ndarray
    format: VideoFormat

    def __post_init__(self):
        for name in PLANES:
            arr = np.asarray(getattr(self, name))
            if arr.shape != self.format.plane_shape(name):
                raise FormatMismatchError(
                    f"plane {name} has shape {arr.shape}, expected {self.format.plane_shape(name)}"
                )
            if arr.dtype != np.uint16:
                if np.issubdtype(arr.dtype, np.floating) or (arr.size and (arr.min() < 0)):
                    raise FormatMismatchError(f"plane {name} must hold unsigned integer samples")
                arr = arr.astype(np.uint16)
            setattr(self, name, arr)

    def plane(self, name) -> np.ndarray:
        if name not in PLANES:
            raise ValueError(f"unknown plane {name!r}")
        return getattr(self, name)

    def check_range(self):
        peak = self.format.peak
        for name in PLANES:
            if getattr(self, name).max(initial=0) > peak:
                raise CorruptSampleError(f"plane {name} has samples above {peak}")

    def __eq__(self, other):
        if not isinstance(other, Frame):
            return NotImplemented
        return self.format.same_geometry(other.format) and all(
            np.array_equal(self.plane(p), other.plane(p)) for p in PLANES
        )

    @classmethod
    def blank(cls, fmt: VideoFormat, value=0):
        return cls(
            np.full(fmt.luma_shape, value, np.uint16),
            np.full(fmt.chroma_shape, value, np.uint16),
            np.full(fmt.chroma_shape, value, np.uint16),
            fmt,
        )


def _decode(buf: bytes, fmt: VideoFormat, strict: bool) -> Frame:
    if fmt.bit_depth == 8:
        data = np.frombuffer(buf, dtype=np.uint8).astype(np.uint16)
    else:
        data = np.frombuffer(buf, dtype="<u2").astype(np.uint16)
        bad = data > fmt.peak
        if bad.any():
            if strict:
                idx = int(np.argmax(bad))
                raise CorruptSampleError(
                    f"sample {int(data[idx])} at offset {idx} exceeds {fmt.peak}"
                )
            warnings.warn(f"{int(bad.sum())} samples above {fmt.peak} clipped", stacklevel=3)
            data = np.minimum(data, fmt.peak).astype(np.uint16)
    ny = fmt.width * fmt.height
    nc = ny // 4
    y = data[:ny].reshape(fmt.luma_shape)
    u = data[ny:ny + nc].reshape(fmt.chroma_shape)
    v = data[ny + nc:ny + 2 * nc].reshape(fmt.chroma_shape)
    return Frame(y, u, v, fmt)


def _encode(frame: Frame) -> bytes:
    dtype = np.uint8 if frame.format.bit_depth == 8 else np.dtype("<u2")
    return b"".join(np.ascontiguousarray(frame.plane(p)).astype(dtype).tobytes() for p in PLANES)


class VideoReader:
    """Random-access reader over a raw .yuv or .y4m file.

    Every read opens its own file handle, so concurrent reads from several
    threads are safe.
    """

    def __init__(self, path, fmt: VideoFormat, offsets=None, strict=True):
        self.path = Path(path)
        self.format = fmt
        self.strict = strict
        self._offsets = offsets
        self._frame_bytes = frame_size_bytes(fmt)

    def __len__(self):
        return self.format.frame_count

    @property
    def frame_count(self):
        return self.format.frame_count

    def read_frame(self, index) -> Frame:
        index = int(index)
        if not 0 <= index < self.format.frame_count:
            raise FrameRangeError(f"frame {index} outside [0, {self.format.frame_count})")
        offset = self._offsets[index] if self._offsets is not None else index * self._frame_bytes
        with open(self.path, "rb") as fh:
            fh.seek(offset)
            buf = fh.read(self._frame_bytes)
        if len(buf) != self._frame_bytes:
            raise FormatMismatchError(f"truncated frame {index} in {self.path}")
        return _decode(buf, self.format, self.strict)

    def __iter__(self):
        for i in range(len(self)):
            yield self.read_frame(i)

    def __repr__(self):
        f = self.format
        return f"VideoReader({str(self.path)!r}, {f.width}x{f.height}, {f.bit_depth}-bit, {f.frame_count} frames)"


class MemoryVideo:
    """In-memory frame sequence with the same read interface as :class:`VideoReader`."""

    def __init__(self, fmt: VideoFormat, frames):
        frames = list(frames)
        for fr in frames:
            if not fr.format.same_geometry(fmt):
                raise FormatMismatchError("frame geometry differs from sequence format")
        self.format = fmt.with_frames(len(frames))
        self.frames = frames

    def __len__(self):
        return len(self.frames)

    @property
    def frame_count(self):
        return len(self.frames)

    def read_frame(self, index) -> Frame:
        if not 0 <= index < len(self.frames):
            raise FrameRangeError(f"frame {index} outside [0, {len(self.frames)})")
        return self.frames[index]

    def __iter__(self):
        return iter(self.frames)

    @classmethod
    def from_planes(cls, fmt, ys, us=None, vs=None):
        """Build from stacked ``(T, H, W)`` luma and optional chroma arrays."""
        ys = np.asarray(ys)
        mid = 1 << (fmt.bit_depth - 1)
        frames = []
        for t in range(ys.shape[0]):
            u = us[t] if us is not None else np.full(fmt.chroma_shape, mid, np.uint16)
            v = vs[t] if vs is not None else np.full(fmt.chroma_shape, mid, np.uint16)
            frames.append(Frame(ys[t], u, v, fmt))
        return cls(fmt, frames)


def open_yuv(path, fmt: VideoFormat, strict=True) -> VideoReader:
    """Open a raw planar file; ``fmt.frame_count == 0`` means infer from the size."""
    path = Path(path)
    size = path.stat().st_size
    if size == 0:
        raise ZeroFrameError(f"{path} is empty")
    fs = frame_size_bytes(fmt)
    if size % fs:
        raise FormatMismatchError(
            f"{path}: {size} bytes is not a multiple of the {fs}-byte frame size "
            f"for {fmt.width}x{fmt.height} {fmt.bit_depth}-bit"
        )
    n = size // fs
    if fmt.frame_count and fmt.frame_count > n:
        raise FormatMismatchError(f"{path} holds {n} frames, {fmt.frame_count} declared")
    return VideoReader(path, fmt.with_frames(fmt.frame_count or n), strict=strict)


def read_frame(reader, index) -> Frame:
    return reader.read_frame(index)


class VideoWriter:
    """Sequential single-owner writer. Use as a context manager."""

    def __init__(self, path, fmt: VideoFormat):
        self.path = Path(path)
        self.format = fmt
        self.frames_written = 0
        self._fh = open(self.path, "wb")

    def write(self, frame: Frame):
        if not frame.format.same_geometry(self.format):
            raise FormatMismatchError(
                f"frame is {frame.format.width}x{frame.format.height} {frame.format.bit_depth}-bit, "
                f"writer expects {self.format.width}x{self.format.height} {self.format.bit_depth}-bit"
            )
        frame.check_range()
        self._fh.write(_encode(frame))
        self.frames_written += 1

    def close(self):
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_frame(writer: VideoWriter, frame: Frame):
    writer.write(frame)


def write_video(path, video) -> VideoFormat:
    with VideoWriter(path, video.format) as w:
        for i in range(len(video)):
            w.write(video.read_frame(i))
    return video.format.with_frames(len(video))


def normalize_plane(frame: Frame, plane="y") -> np.ndarray:
    return frame.plane(plane).astype(np.float64) / frame.format.peak


def luma_stack(video) -> np.ndarray:
    """All luma planes as a ``(T, H, W)`` uint16 array."""
    return np.stack([video.read_frame(i).y for i in range(len(video))])


# --- Y4M -------------------------------------------------------------------

_Y4M_CHROMA = {
    "420": 8,
    "420jpeg": 8,
    "420paldv": 8,
    "420mpeg2": 8,
    "420p10": 10,
}


def parse_y4m_header(line: str) -> VideoFormat:
    tokens = line.split()
    if not tokens or tokens[0] != "YUV4MPEG2":
        raise FormatMismatchError("not a YUV4MPEG2 stream")
    width = height = None
    fps = Fraction(25)
    depth = 8
    for tok in tokens[1:]:
        key, val = tok[0], tok[1:]
        if key == "W":
            width = int(val)
        elif key == "H":
            height = int(val)
        elif key == "F":
            fps = parse_fps(val)
        elif key == "C":
            if val not in _Y4M_CHROMA:
                raise FormatMismatchError(f"unsupported Y4M colour space C{val}")
            depth = _Y4M_CHROMA[val]
        elif key == "I" and val not in ("p", "?"):
            raise FormatMismatchError("interlaced Y4M is not supported")
    if width is None or height is None:
        raise FormatMismatchError("Y4M header lacks W/H")
    return VideoFormat(width, height, depth, fps.numerator, fps.denominator)


def open_y4m(path, strict=True) -> VideoReader:
    path = Path(path)
    size = path.stat().st_size
    with open(path, "rb") as fh:
        header = fh.readline(4096)
        if not header.endswith(b"\n"):
            raise FormatMismatchError(f"{path}: unterminated Y4M header")
        fmt = parse_y4m_header(header.decode("ascii", "replace"))
        fs = frame_size_bytes(fmt)
        offsets = []
        pos = len(header)
        while pos < size:
            fh.seek(pos)
            line = fh.readline(1024)
            if not line.startswith(b"FRAME") or not line.endswith(b"\n"):
                raise FormatMismatchError(f"{path}: bad FRAME marker at byte {pos}")
            data = pos + len(line)
            if data + fs > size:
                raise FormatMismatchError(f"{path}: truncated frame at byte {data}")
            offsets.append(data)
            pos = data + fs
    if not offsets:
        raise ZeroFrameError(f"{path} has no frames")
    return VideoReader(path, fmt.with_frames(len(offsets)), offsets=offsets, strict=strict)


def write_y4m(path, video):
    fmt = video.format
    tag = "C420p10 XYSCSS=420P10" if fmt.bit_depth == 10 else "C420jpeg"
    header = f"YUV4MPEG2 W{fmt.width} H{fmt.height} F{fmt.fps_num}:{fmt.fps_den} Ip A1:1 {tag}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        for i in range(len(video)):
            fh.write(b"FRAME\n")
            fh.write(_encode(video.read_frame(i)))


# --- geometry sidecars -----------------------------------------------------

def load_geometry(path) -> VideoFormat:
    """Read a JSON sidecar: ``{"width", "height", "bit_depth", "fps"}``."""
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    return VideoFormat.from_fps(
        int(d["width"]),
        int(d["height"]),
        int(d.get("bit_depth", d.get("bitdepth", 8))),
        d.get("fps", "30"),
        int(d.get("frame_count", 0)),
    )


def save_geometry(path, fmt: VideoFormat):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(fmt.to_dict(), fh, indent=2)
        fh.write("\n")


def open_video(path, fmt: VideoFormat | None = None, strict=True) -> VideoReader:
    """Open ``.y4m`` from its header, otherwise raw YUV from ``fmt`` or a sidecar.

    Sidecars are looked up as ``<file>.json`` then ``<stem>.json``.
    """
    path = Path(path)
    if path.suffix.lower() == ".y4m":
        return open_y4m(path, strict=strict)
    if fmt is None:
        for cand in (Path(str(path) + ".json"), path.with_suffix(".json")):
            if cand.exists() and cand != path:
                fmt = load_geometry(cand)
                break
    if fmt is None:
        raise FormatMismatchError(
            f"no geometry for {path}: pass width/height/bit depth or add {path.name}.json"
        )
    return open_yuv(path, fmt, strict=strict)


def file_digest(path, chunk=1 << 20) -> str:
    import hashlib

    h = hashlib.sha256()
    with open(path, "rb") as fh:
        while True:
            b = fh.read(chunk)
            if not b:
                break
            h.update(b)
    return h.hexdigest()

"""External encoder/decoder adapters, bitrate accounting and a content-addressed
encode cache."""

from __future__ import annotations

import hashlib
import json
import os
import re
import shlex
import subprocess
import tempfile
import threading
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

from ..errors import AdapterError, ConfigurationError, EncodeError, ZeroFrameError
from ..yuv import VideoFormat, file_digest, frame_size_bytes

PLACEHOLDERS = ("input", "output", "qp", "qpif_frame", "width", "height", "fps", "frames", "bitdepth")
_FIELD = re.compile(r"\{(\w+)\}")


def split_template(template) -> list:
    """Argument vector from a command string (POSIX shell-style quoting) or list."""
    if isinstance(template, (list, tuple)):
        return [str(t) for t in template]
    return shlex.split(template)


def template_fields(template) -> set:
    return {m for tok in split_template(template) for m in _FIELD.findall(tok)}


def substitute(template, values: dict) -> list:
    """Literal per-token placeholder replacement; nothing is shell-expanded."""
    def repl(m):
        key = m.group(1)
        if key not in values:
            raise ConfigurationError(f"template uses unknown placeholder {{{key}}}")
        return str(values[key])

    return [_FIELD.sub(repl, tok) for tok in split_template(template)]


def geometry_values(fmt: VideoFormat) -> dict:
    return {
        "width": fmt.width, "height": fmt.height, "fps": fmt.fps_text,
        "frames": fmt.frame_count, "bitdepth": fmt.bit_depth,
    }


@dataclass(frozen=True)
class CodecAdapter:
    name: str
    encode_template: object
    decode_template: object
    supports_qpif: bool = False

    def __post_init__(self):
        enc, dec = template_fields(self.encode_template), template_fields(self.decode_template)
        for label, fields_, allowed in (("encode", enc, set(PLACEHOLDERS)), ("decode", dec, {"input", "output"})):
            unknown = fields_ - allowed
            if unknown:
                raise ConfigurationError(f"{label} template: unknown placeholders {sorted(unknown)}")
            if not {"input", "output"} <= fields_:
                raise ConfigurationError(f"{label} template needs {{input}} and {{output}}")
        if "qp" not in enc:
            raise ConfigurationError("encode template needs {qp}")
        if self.supports_qpif and "qpif_frame" not in enc:
            raise ConfigurationError("adapter claims qpif support but has no {qpif_frame}")

    @classmethod
    def from_dict(cls, d):
        return cls(d.get("name", "codec"), d["encode"], d["decode"], bool(d.get("supports_qpif", False)))

    def to_dict(self):
        return {"name": self.name, "encode": self.encode_template, "decode": self.decode_template,
                "supports_qpif": self.supports_qpif}


def compute_bitrate(bitstream_bytes, frames, fps) -> float:
    """kbps = 8 * bytes / (frames / fps) / 1000."""
    if frames <= 0:
        raise ZeroFrameError("bitrate needs at least one frame")
    return float(Fraction(8 * int(bitstream_bytes)) * Fraction(fps) / frames / 1000)


# --- coding constraints -----------------------------------------------------

MAX_STRUCTURAL_DELAY = 16
MAX_RANDOM_ACCESS_S = 1.1


@dataclass
class ConstraintReport:
    rules: list
    passed: bool

    def lines(self):
        return [f"{'PASS' if ok else 'FAIL'} {name}: {detail}" for name, ok, detail in self.rules]


def validate_coding_constraints(gop, intra_period, fps) -> ConstraintReport:
    """Structural delay (GOP) at most 16 frames; random access interval at most
    1.1 s, i.e. intra_period / fps <= 1.1."""
    fps = Fraction(str(fps)) if not isinstance(fps, Fraction) else fps
    if gop <= 0 or intra_period <= 0 or fps <= 0:
        return ConstraintReport([("positive", False, "gop, intra_period and fps must be > 0")], False)
    seconds = Fraction(intra_period) / fps
    rules = [
        ("structural-delay", gop <= MAX_STRUCTURAL_DELAY, f"gop {gop} <= {MAX_STRUCTURAL_DELAY}"),
        ("random-access", seconds <= Fraction(MAX_RANDOM_ACCESS_S).limit_denominator(10),
         f"intra period {intra_period} at {float(fps):g} fps = {float(seconds):.3f} s <= {MAX_RANDOM_ACCESS_S} s"),
    ]
    return ConstraintReport(rules, all(ok for _, ok, _ in rules))


# --- encoding ---------------------------------------------------------------

@dataclass
class RunResult:
    qp: int
    qpif_frame: int | None
    bitstream_bytes: int
    bitrate_kbps: float
    decoded_path: str | None
    encode_log: str
    cache_key: str
    bitstream_path: str | None = None
    cached: bool = False
    in_tolerance: bool | None = None
    trace: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def run_command(argv, cwd=None, what="command"):
    try:
        proc = subprocess.run(argv, cwd=cwd, capture_output=True, text=True)
    except OSError as e:
        raise EncodeError(f"{what} could not start: {e}", None, str(e)) from None
    log = proc.stdout + proc.stderr
    if proc.returncode != 0:
        raise EncodeError(f"{what} exited with status {proc.returncode}: {' '.join(argv)}",
                          proc.returncode, log)
    return log


class EncodeCache:
    """Encodes keyed by digest of (adapter, input content, qp, qpif frame).

    Each key owns ``<root>/cache/<key>/`` holding ``bitstream.bin``,
    ``decoded.yuv`` and ``result.json``. A per-key lock serializes the first
    producer; later callers read the stored result.
    """

    def __init__(self, root):
        self.root = Path(root)
        self.dir = self.root / "cache"
        self.dir.mkdir(parents=True, exist_ok=True)
        self._locks = {}
        self._guard = threading.Lock()
        self._digests = {}
        self.invocations = 0

    def lock(self, key):
        with self._guard:
            return self._locks.setdefault(key, threading.Lock())

    def digest(self, path):
        st = os.stat(path)
        k = (os.path.abspath(path), st.st_size, st.st_mtime_ns)
        with self._guard:
            if k in self._digests:
                return self._digests[k]
        d = file_digest(path)
        with self._guard:
            self._digests[k] = d
        return d

    def key(self, adapter: CodecAdapter, input_path, fmt: VideoFormat, qp, qpif):
        blob = json.dumps({
            "adapter": adapter.to_dict(), "input": self.digest(input_path),
            "geometry": fmt.to_dict(), "qp": int(qp), "qpif": qpif,
        }, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()

    def load(self, key):
        p = self.dir / key / "result.json"
        if not p.exists():
            return None
        with open(p, encoding="utf-8") as fh:
            return RunResult.from_dict(json.load(fh))

    def store(self, key, result: RunResult):
        p = self.dir / key / "result.json"
        tmp = p.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(result.to_dict(), fh, indent=2)
        os.replace(tmp, p)

    def prune(self, keep_keys):
        """Drop bitstreams and decoded video outside ``keep_keys``; results stay."""
        freed = 0
        for d in self.dir.iterdir():
            if not d.is_dir() or d.name in keep_keys:
                continue
            for name in ("bitstream.bin", "bitstream.bin.side.json", "decoded.yuv"):
                f = d / name
                if f.exists():
                    freed += f.stat().st_size
                    f.unlink()
            res = self.load(d.name)
            if res is not None and res.decoded_path:
                res.decoded_path = None
                self.store(d.name, res)
        return freed


def encode(adapter: CodecAdapter, input_path, fmt: VideoFormat, qp, qpif_frame=None,
           cache: EncodeCache | None = None, decode=True, force=False) -> RunResult:
    """Encode (and by default decode) ``input_path`` at ``qp``.

    ``qpif_frame`` switches to ``qp + 1`` from that frame on; ``None`` means no
    switch and is passed to the template as the frame count. ``decode=False``
    only measures the rate. ``force`` re-runs the encoder even on a cache hit.
    """
    if not os.path.exists(input_path):
        raise ConfigurationError(f"no such input {input_path}")
    if fmt.frame_count <= 0:
        raise ZeroFrameError("encode needs the frame count of the input")
    if qpif_frame is not None and not adapter.supports_qpif:
        raise ConfigurationError(f"adapter {adapter.name} does not support qpif")
    if cache is None:
        cache = EncodeCache(tempfile.mkdtemp(prefix="darkbench-"))
    key = cache.key(adapter, input_path, fmt, qp, qpif_frame)
    cell = cache.dir / key
    with cache.lock(key):
        res = cache.load(key)
        if res is not None and not force and (not decode or res.decoded_path):
            res.cached = True
            return res
        cell.mkdir(parents=True, exist_ok=True)
        bitstream = cell / "bitstream.bin"
        log = res.encode_log if res is not None else ""
        if res is None or force or not bitstream.exists():
            values = dict(geometry_values(fmt), input=os.path.abspath(input_path), output=str(bitstream),
                          qp=int(qp), qpif_frame=fmt.frame_count if qpif_frame is None else int(qpif_frame))
            cache.invocations += 1
            log = run_command(substitute(adapter.encode_template, values), cwd=cell,
                              what=f"{adapter.name} encoder")
            if not bitstream.exists():
                raise AdapterError(f"{adapter.name} encoder produced no bitstream")
        nbytes = bitstream.stat().st_size
        res = RunResult(int(qp), qpif_frame, nbytes, compute_bitrate(nbytes, fmt.frame_count, fmt.fps),
                        None, log, key, str(bitstream))
        if decode:
            decoded = cell / "decoded.yuv"
            log2 = run_command(substitute(adapter.decode_template, {"input": str(bitstream), "output": str(decoded)}),
                               cwd=cell, what=f"{adapter.name} decoder")
            expect = frame_size_bytes(fmt) * fmt.frame_count
            got = decoded.stat().st_size if decoded.exists() else -1
            if got != expect:
                raise AdapterError(f"{adapter.name} decoder wrote {got} bytes, expected {expect} "
                                   f"({fmt.width}x{fmt.height} {fmt.bit_depth}-bit, {fmt.frame_count} frames)")
            res.decoded_path = str(decoded)
            res.encode_log = log + log2
        cache.store(key, res)
        return res

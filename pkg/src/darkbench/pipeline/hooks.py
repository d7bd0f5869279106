"""Pre/post filters applied around the codec: built-in denoise or an external command."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass

from ..errors import AdapterError, ConfigurationError
from ..noise import DenoiseConfig, denoise_to_file
from ..yuv import frame_size_bytes, open_yuv
from .codec import geometry_values, run_command, substitute, template_fields

HOOK_KINDS = ("builtin-denoise", "external-command")


@dataclass(frozen=True)
class FilterHook:
    kind: str
    config: object

    def __post_init__(self):
        if self.kind not in HOOK_KINDS:
            raise ConfigurationError(f"hook kind must be one of {HOOK_KINDS}")
        if self.kind == "builtin-denoise" and not isinstance(self.config, DenoiseConfig):
            raise ConfigurationError("builtin-denoise hook needs a DenoiseConfig")
        if self.kind == "external-command":
            f = template_fields(self.config)
            if not {"input", "output"} <= f:
                raise ConfigurationError("filter command needs {input} and {output}")
            unknown = f - {"input", "output", "width", "height", "fps", "frames", "bitdepth"}
            if unknown:
                raise ConfigurationError(f"filter command: unknown placeholders {sorted(unknown)}")

    @classmethod
    def from_dict(cls, d):
        kind = d.get("kind", "builtin-denoise")
        if kind == "builtin-denoise":
            c = d.get("config", {})
            w = c.get("weights")
            return cls(kind, DenoiseConfig(c.get("kind", "temporal-moving-average"), int(c.get("window", 5)),
                                           tuple(w) if w is not None else None,
                                           float(c.get("spatial_sigma", 1.0))))
        return cls(kind, d["command"])

    def to_dict(self):
        if self.kind == "builtin-denoise":
            return {"kind": self.kind, "config": self.config.to_dict()}
        return {"kind": self.kind, "command": self.config}

    def digest(self):
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    def apply(self, input_path, fmt, output_path):
        """Filter a raw YUV file into ``output_path`` of identical geometry."""
        if self.kind == "builtin-denoise":
            denoise_to_file(open_yuv(input_path, fmt), self.config, output_path)
        else:
            values = dict(geometry_values(fmt), input=os.path.abspath(input_path), output=os.path.abspath(output_path))
            run_command(substitute(self.config, values), what="filter command")
        expect = frame_size_bytes(fmt) * fmt.frame_count
        got = os.path.getsize(output_path) if os.path.exists(output_path) else -1
        if got != expect:
            raise AdapterError(f"filter wrote {got} bytes, expected {expect}")
        return output_path


def apply_cached(hook: FilterHook, input_path, fmt, cache, input_digest=None):
    """Filter once per (hook, input content); result lives under ``<root>/hooks``."""
    d = input_digest or cache.digest(input_path)
    key = hashlib.sha256(f"{hook.digest()}:{d}".encode()).hexdigest()
    out_dir = cache.root / "hooks"
    out_dir.mkdir(parents=True, exist_ok=True)
    out = out_dir / f"{key}.yuv"
    with cache.lock("hook:" + key):
        if not out.exists():
            tmp = out_dir / f"{key}.partial.yuv"
            hook.apply(input_path, fmt, tmp)
            os.replace(tmp, out)
    return str(out)

"""Deterministic stand-in encoder/decoder with a closed-form rate model.

Encoding writes a bitstream whose size follows ``R(qp) = A * 2**(-qp/6)`` kbps
(frames from ``--qpif`` onward use ``qp + 1``) plus a small JSON sidecar
naming the source. Decoding quantizes 8x8 DCT coefficients of the source with
a QP-dependent step, so fidelity falls with QP. Usage::

    python -m darkbench.mockcodec encode --input src.yuv --output out.bin --qp 30 \\
        --width 256 --height 256 --frames 64 --fps 60 --bitdepth 10 [--qpif 20]
    python -m darkbench.mockcodec decode --input out.bin --output rec.yuv
"""

import argparse
import json
import os
import sys
from fractions import Fraction

DEFAULT_SCALE = 20000.0


def rate_kbps(qp, scale=DEFAULT_SCALE):
    return scale * 2.0 ** (-qp / 6.0)


def mixed_rate_kbps(qp, frames, qpif=None, scale=DEFAULT_SCALE):
    """Average rate when frames ``>= qpif`` are coded at ``qp + 1``."""
    f = frames if qpif is None else min(max(int(qpif), 0), frames)
    return (f * rate_kbps(qp, scale) + (frames - f) * rate_kbps(qp + 1, scale)) / frames


def bitstream_bytes(qp, frames, fps, qpif=None, scale=DEFAULT_SCALE):
    seconds = frames / Fraction(fps)
    return int(round(mixed_rate_kbps(qp, frames, qpif, scale) * 1000.0 / 8.0 * float(seconds)))


def _encode(a):
    if a.counter:
        with open(a.counter, "a", encoding="utf-8") as fh:
            fh.write(f"encode {a.qp} {a.qpif}\n")
    if a.fail:
        print("mock encoder: forced failure", file=sys.stderr)
        return 3
    if not os.path.exists(a.input):
        print(f"mock encoder: no such input {a.input}", file=sys.stderr)
        return 2
    n = bitstream_bytes(a.qp, a.frames, a.fps, a.qpif, a.scale)
    with open(a.output, "wb") as fh:
        fh.write(b"\0" * n)
    side = {
        "source": os.path.abspath(a.input), "qp": a.qp, "qpif": a.qpif,
        "width": a.width, "height": a.height, "frames": a.frames, "bitdepth": a.bitdepth,
    }
    with open(a.output + ".side.json", "w", encoding="utf-8") as fh:
        json.dump(side, fh)
    print(f"mock encoder: qp={a.qp} qpif={a.qpif} bytes={n}")
    return 0


def _quantize_plane(x, step, block=8):
    """8x8 orthonormal DCT, uniform coefficient quantization, inverse DCT."""
    import numpy as np
    from scipy.fft import dctn, idctn

    h, w = x.shape
    ph, pw = -h % block, -w % block
    xp = np.pad(x, ((0, ph), (0, pw)), mode="edge")
    H, W = xp.shape
    b = xp.reshape(H // block, block, W // block, block).transpose(0, 2, 1, 3)
    c = dctn(b, axes=(-2, -1), norm="ortho")
    c = np.floor(c / step + 0.5) * step
    r = idctn(c, axes=(-2, -1), norm="ortho").transpose(0, 2, 1, 3).reshape(H, W)
    return r[:h, :w]


def _decode(a):
    import numpy as np

    with open(a.input + ".side.json", encoding="utf-8") as fh:
        side = json.load(fh)
    w, h, n, depth = side["width"], side["height"], side["frames"], side["bitdepth"]
    dtype = np.dtype("<u2") if depth > 8 else np.dtype("u1")
    cw, ch = (w + 1) // 2, (h + 1) // 2
    sizes = [w * h, cw * ch, cw * ch]
    shapes = [(h, w), (ch, cw), (ch, cw)]
    per_frame = sum(sizes)
    src = np.fromfile(side["source"], dtype=dtype, count=per_frame * n).reshape(n, per_frame)
    peak = (1 << depth) - 1
    scale = 2.0 ** (depth - 8)
    qpif = n if side["qpif"] is None else int(side["qpif"])
    out = np.empty_like(src)
    for t in range(n):
        qp = side["qp"] + (1 if t >= qpif else 0)
        step = 2.0 ** ((qp - 4) / 6.0) * scale
        pos = 0
        for size, shape in zip(sizes, shapes):
            plane = src[t, pos:pos + size].reshape(shape).astype(np.float64)
            rec = _quantize_plane(plane, step)
            out[t, pos:pos + size] = np.clip(np.rint(rec), 0, peak).astype(dtype).ravel()
            pos += size
    out.tofile(a.output)
    print(f"mock decoder: {n} frames")
    return 0


def main(argv=None):
    p = argparse.ArgumentParser(prog="mockcodec")
    sub = p.add_subparsers(dest="cmd", required=True)
    e = sub.add_parser("encode")
    e.add_argument("--input", required=True)
    e.add_argument("--output", required=True)
    e.add_argument("--qp", type=int, required=True)
    e.add_argument("--qpif", type=int, default=None)
    e.add_argument("--width", type=int, required=True)
    e.add_argument("--height", type=int, required=True)
    e.add_argument("--frames", type=int, required=True)
    e.add_argument("--fps", default="30")
    e.add_argument("--bitdepth", type=int, default=8)
    e.add_argument("--scale", type=float, default=DEFAULT_SCALE)
    e.add_argument("--counter", default=None, help="append one line per invocation")
    e.add_argument("--fail", action="store_true", help="exit with status 3")
    d = sub.add_parser("decode")
    d.add_argument("--input", required=True)
    d.add_argument("--output", required=True)
    a = p.parse_args(argv)
    return _encode(a) if a.cmd == "encode" else _decode(a)


if __name__ == "__main__":
    sys.exit(main())

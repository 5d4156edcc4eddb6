"""Binary weight dump: magic, format version, per-array shape header, raw float64 data.

Layout (little endian)::

    b"RTDPNET" | u8 version | u32 array_count
    repeated: u8 name_len | name (ascii) | u8 ndim | u32 * ndim shape | f64 * prod(shape)
"""
import struct

import numpy as np

from .network import PARAM_NAMES, NetParams

MAGIC = b"RTDPNET"
VERSION = 1


class CheckpointError(ValueError):
    pass


def dumps(params: NetParams) -> bytes:
    out = [MAGIC, struct.pack("<BI", VERSION, len(PARAM_NAMES))]
    for name in PARAM_NAMES:
        a = np.ascontiguousarray(getattr(params, name), dtype="<f8")
        out.append(struct.pack("<B", len(name)) + name.encode("ascii"))
        out.append(struct.pack("<B", a.ndim) + struct.pack(f"<{a.ndim}I", *a.shape))
        out.append(a.tobytes())
    return b"".join(out)


def loads(data: bytes) -> NetParams:
    if not data.startswith(MAGIC):
        raise CheckpointError("not a network checkpoint (bad magic)")
    pos = len(MAGIC)
    version, count = struct.unpack_from("<BI", data, pos)
    pos += 5
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    arrays = {}
    try:
        for _ in range(count):
            (n,) = struct.unpack_from("<B", data, pos)
            name = data[pos + 1:pos + 1 + n].decode("ascii")
            pos += 1 + n
            (ndim,) = struct.unpack_from("<B", data, pos)
            shape = struct.unpack_from(f"<{ndim}I", data, pos + 1)
            pos += 1 + 4 * ndim
            size = int(np.prod(shape)) * 8
            if pos + size > len(data):
                raise CheckpointError("truncated checkpoint")
            arrays[name] = np.frombuffer(data[pos:pos + size], dtype="<f8").reshape(shape).astype(np.float64)
            pos += size
    except (struct.error, UnicodeDecodeError) as exc:
        raise CheckpointError(f"malformed checkpoint: {exc}") from exc
    if pos != len(data) or set(arrays) != set(PARAM_NAMES):
        raise CheckpointError("truncated or malformed checkpoint")
    return NetParams(**arrays)


def save(params: NetParams, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(params))


def load(path) -> NetParams:
    with open(path, "rb") as fh:
        return loads(fh.read())

"""Binary checkpoint format for Q-network parameters.

Layout (all integers little-endian):

    magic   b"QDQN1"
    version u8 (= 1)
    count   u32
    then per array:
        name_len u32, name utf-8,
        ndim u32, dims u64 each,
        data as row-major float32

Arrays include the network parameters and any metadata arrays supplied
by the caller (e.g. observation scales, architecture constants); the
round trip through disk is exact for float32 inputs.
"""

import struct

import numpy as np

MAGIC = b"QDQN1"
VERSION = 1


def save_checkpoint(path, arrays: dict) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<B", VERSION))
        fh.write(struct.pack("<I", len(arrays)))
        for name in sorted(arrays):
            data = np.ascontiguousarray(arrays[name], dtype=np.float32)
            raw_name = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw_name)))
            fh.write(raw_name)
            fh.write(struct.pack("<I", data.ndim))
            for dim in data.shape:
                fh.write(struct.pack("<Q", dim))
            fh.write(data.astype("<f4").tobytes())


def load_checkpoint(path) -> dict:
    with open(path, "rb") as fh:
        magic = fh.read(5)
        if magic != MAGIC:
            raise ValueError(f"bad checkpoint magic {magic!r}")
        (version,) = struct.unpack("<B", fh.read(1))
        if version != VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        (count,) = struct.unpack("<I", fh.read(4))
        arrays = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<I", fh.read(4))
            name = fh.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<I", fh.read(4))
            shape = tuple(
                struct.unpack("<Q", fh.read(8))[0] for _ in range(ndim)
            )
            n_items = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(4 * n_items), dtype="<f4")
            arrays[name] = data.reshape(shape).astype(np.float32)
        return arrays

"""Binary model files.

Layout (all little-endian)::

    b"TTGO" | u32 version | u32 d | u32 d1
    per dimension: u64 node count, f64 nodes
    u64 rank chain (d + 1 entries)
    f64 cores, each (left rank, node, right rank) in row-major order
    f64 beta | u8 transform id | u32 CRC-32 of every preceding byte

Header fields are checked before the checksum, so a file from a newer
writer reports its version rather than a checksum failure.
"""

from __future__ import annotations

import io
import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import ChecksumError, HeaderError, RankChainError, SizeError, UnsupportedVersionError
from .grid import Grid, TaskSplit
from .pipeline import TTGOModel
from .tt import TTCores

MAGIC = b"TTGO"
VERSION = 1
_HEAD = struct.Struct("<4sIII")
_U64 = np.dtype("<u8")
_F64 = np.dtype("<f8")


def encode_model(model: TTGOModel) -> bytes:
    buf = io.BytesIO()
    d = model.grid.d
    buf.write(_HEAD.pack(MAGIC, VERSION, d, model.split.d1))
    for nodes in model.grid.nodes:
        buf.write(struct.pack("<Q", nodes.size))
        buf.write(np.ascontiguousarray(nodes, dtype=_F64).tobytes())
    buf.write(np.asarray(model.tt.ranks, dtype=_U64).tobytes())
    for core in model.tt.cores:
        buf.write(np.ascontiguousarray(core, dtype=_F64).tobytes())
    buf.write(struct.pack("<dB", float(model.beta), int(model.transform)))
    body = buf.getvalue()
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    def __init__(self, data: bytes, end: int):
        self.data, self.pos, self.end = data, 0, end

    def take(self, n: int, what: str) -> bytes:
        if n < 0 or self.pos + n > self.end:
            raise SizeError(f"file too short while reading {what}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def array(self, dtype, count: int, what: str) -> np.ndarray:
        raw = self.take(count * dtype.itemsize, what)
        return np.frombuffer(raw, dtype=dtype).astype(dtype.newbyteorder("="))


def decode_model(data: bytes) -> TTGOModel:
    if len(data) < _HEAD.size:
        raise SizeError(f"file has {len(data)} bytes, shorter than the header")
    magic, version, d, d1 = _HEAD.unpack_from(data)
    if magic != MAGIC:
        raise HeaderError(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported format version {version} (reader knows {VERSION})")
    if len(data) < _HEAD.size + 4:
        raise SizeError("file ends before the checksum")
    (crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) != crc:
        raise ChecksumError("CRC-32 mismatch; the file is truncated or corrupted")
    if d < 1 or d1 > d:
        raise HeaderError(f"invalid dimensions d={d}, d1={d1}")

    rd = _Reader(data, len(data) - 4)
    rd.pos = _HEAD.size
    nodes = []
    for k in range(d):
        (n,) = struct.unpack("<Q", rd.take(8, f"node count {k}"))
        nodes.append(rd.array(_F64, n, f"nodes of dim {k}"))
    ranks = rd.array(_U64, d + 1, "rank chain").astype(np.int64)
    if ranks[0] != 1 or ranks[-1] != 1 or np.any(ranks < 1):
        raise RankChainError(f"invalid rank chain {ranks.tolist()}")
    cores = []
    for k in range(d):
        shape = (int(ranks[k]), nodes[k].size, int(ranks[k + 1]))
        cores.append(rd.array(_F64, int(np.prod(shape)), f"core {k}").reshape(shape))
    beta, transform = struct.unpack("<dB", rd.take(9, "trailer"))
    if rd.pos != rd.end:
        raise SizeError(f"{rd.end - rd.pos} unexpected bytes before the checksum")
    try:
        grid = Grid(nodes)
    except ValueError as exc:
        raise HeaderError(f"invalid grid: {exc}") from exc
    return TTGOModel(grid=grid, tt=TTCores(cores), split=TaskSplit(d1, d - d1),
                     beta=beta, transform=transform)


def save_model(model: TTGOModel, path) -> None:
    path = Path(path)
    data = encode_model(model)
    try:
        path.write_bytes(data)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write model: {exc.strerror}", str(path)) from exc


def load_model(path) -> TTGOModel:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise OSError(exc.errno, f"cannot read model: {exc.strerror}", str(path)) from exc
    return decode_model(data)


def models_identical(a: TTGOModel, b: TTGOModel) -> bool:
    """Bitwise equality of nodes, cores, beta, split and transform."""
    if a.grid.d != b.grid.d or a.split != b.split or a.transform != b.transform:
        return False
    if np.float64(a.beta).tobytes() != np.float64(b.beta).tobytes():
        return False
    same = lambda x, y: x.shape == y.shape and x.astype(_F64).tobytes() == y.astype(_F64).tobytes()
    return (all(same(x, y) for x, y in zip(a.grid.nodes, b.grid.nodes))
            and all(same(x, y) for x, y in zip(a.tt.cores, b.tt.cores)))

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import ClassVar, Union

import numpy as np

from ..errors import FieldFormatError

PathLike = Union[str, Path]

DSKF_MAGIC = b"DSKF"
DSKF_VERSION = 1
_PAYLOAD_DTYPE = np.dtype("<f4")


@dataclass(frozen=True, slots=True)
class DskfHeader:
    """Fixed 20-byte header: magic, version, height, width, channels (little-endian u32)."""

    height: int
    width: int
    channels: int
    version: int = DSKF_VERSION

    layout: ClassVar[struct.Struct] = struct.Struct("<4sIIII")

    @property
    def payload_floats(self) -> int:
        return self.height * self.width * self.channels

    @property
    def payload_bytes(self) -> int:
        return self.payload_floats * _PAYLOAD_DTYPE.itemsize

    def pack(self) -> bytes:
        return self.layout.pack(DSKF_MAGIC, self.version, self.height, self.width, self.channels)

    @classmethod
    def unpack(cls, raw: bytes, path: str) -> "DskfHeader":
        if len(raw) < cls.layout.size:
            raise FieldFormatError(
                f"Truncated header: expected {cls.layout.size} bytes, found {len(raw)}",
                offset=len(raw), path=path,
            )
        magic, version, height, width, channels = cls.layout.unpack_from(raw)
        if magic != DSKF_MAGIC:
            raise FieldFormatError(f"Bad magic {magic!r}, expected {DSKF_MAGIC!r}", offset=0, path=path)
        if version != DSKF_VERSION:
            raise FieldFormatError(f"Unsupported format version {version}", offset=4, path=path)
        if height < 1 or width < 1 or channels < 1:
            raise FieldFormatError(
                f"Zero dimension in header ({height}x{width}x{channels})", offset=8, path=path
            )
        return cls(height=height, width=width, channels=channels, version=version)


def write_tensor(path: PathLike, tensor: np.ndarray) -> None:
    """
    Write a (height, width) or (height, width, channels) grid as DSKF.

    Payload is float32, row-major with y outer, x middle, channel inner.
    """
    array = np.asarray(tensor)
    if array.ndim == 2:
        array = array[:, :, None]
    if array.ndim != 3:
        raise FieldFormatError(f"Only 2-D or 3-D grids can be stored, got shape {array.shape}", path=str(path))

    header = DskfHeader(height=array.shape[0], width=array.shape[1], channels=array.shape[2])
    payload = np.ascontiguousarray(array, dtype=_PAYLOAD_DTYPE)
    with open(path, "wb") as handle:
        handle.write(header.pack())
        handle.write(payload.tobytes(order="C"))


def read_tensor(path: PathLike) -> np.ndarray:
    """
    Read a DSKF file into a (height, width, channels) float32 array.

    Raises:
        FieldFormatError: Bad magic, unsupported version, truncated or oversized payload
    """
    raw = Path(path).read_bytes()
    header = DskfHeader.unpack(raw, str(path))

    start = DskfHeader.layout.size
    available = len(raw) - start
    if available < header.payload_bytes:
        raise FieldFormatError(
            f"Header declares {header.height}x{header.width}x{header.channels} "
            f"({header.payload_floats} floats) but payload holds "
            f"{available // _PAYLOAD_DTYPE.itemsize} floats",
            offset=len(raw), path=str(path),
        )
    if available > header.payload_bytes:
        raise FieldFormatError(
            f"Trailing {available - header.payload_bytes} bytes after payload",
            offset=start + header.payload_bytes, path=str(path),
        )

    values = np.frombuffer(raw, dtype=_PAYLOAD_DTYPE, count=header.payload_floats, offset=start)
    return values.reshape(header.height, header.width, header.channels).astype(np.float32)

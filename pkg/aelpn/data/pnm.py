"""
PGM/PPM reading and writing

Supported: P2/P5 (grayscale) and P3/P6 (RGB), 8-bit with maxval 255. Color
images are reduced to luma with weights (0.299, 0.587, 0.114). Pixel values
are returned as float64 in [0, 1], row-major, shape (height, width).
"""

import logging
from pathlib import Path
from typing import List, Tuple

import numpy as np

from ..errors import ConfigError, PnmHeaderError, PnmMaxvalError, PnmTruncatedError

logger = logging.getLogger(__name__)

MAXVAL = 255
LUMA = np.array([0.299, 0.587, 0.114])

_CHANNELS = {b"P2": 1, b"P5": 1, b"P3": 3, b"P6": 3}
_BINARY = {b"P5", b"P6"}
_WHITESPACE = b" \t\r\n\x0b\x0c"


class _Tokens:
    """Whitespace-separated header tokens with '#' comments, tracking byte offsets"""

    def __init__(self, data: bytes, pos: int):
        self.data = data
        self.pos = pos

    def _skip(self) -> None:
        data = self.data
        while self.pos < len(data):
            c = data[self.pos:self.pos + 1]
            if c in _WHITESPACE and c:
                self.pos += 1
            elif c == b"#":
                end = data.find(b"\n", self.pos)
                self.pos = len(data) if end < 0 else end + 1
            else:
                return

    def next(self) -> Tuple[bytes, int]:
        self._skip()
        start = self.pos
        while self.pos < len(self.data) and self.data[self.pos:self.pos + 1] not in _WHITESPACE + b"#":
            self.pos += 1
        return self.data[start:self.pos], start

    def integer(self, what: str) -> Tuple[int, int]:
        token, offset = self.next()
        if not token.isdigit():
            found = token.decode("latin-1") if token else "end of file"
            raise PnmHeaderError(f"Expected {what}, found {found!r}", offset)
        return int(token), offset


def _parse_header(data: bytes) -> Tuple[bytes, int, int, int, _Tokens]:
    magic = data[:2]
    if magic not in _CHANNELS:
        raise PnmHeaderError(f"Unsupported magic number {magic!r}", 0)
    tokens = _Tokens(data, 2)
    width, offset = tokens.integer("width")
    if width < 1:
        raise PnmHeaderError("Width must be positive", offset)
    height, offset = tokens.integer("height")
    if height < 1:
        raise PnmHeaderError("Height must be positive", offset)
    maxval, offset = tokens.integer("maxval")
    if maxval != MAXVAL:
        raise PnmMaxvalError(f"Unsupported maxval {maxval} (only {MAXVAL})", offset)
    return magic, width, height, _CHANNELS[magic], tokens


def parse_pnm(data: bytes) -> np.ndarray:
    """
    Decode PGM/PPM bytes

    Raises:
        PnmHeaderError: Bad magic number or header field
        PnmMaxvalError: maxval other than 255, or an ASCII sample above it
        PnmTruncatedError: Fewer payload bytes (or ASCII samples) than the header promises
    """
    magic, width, height, channels, tokens = _parse_header(data)
    expected = width * height * channels
    if magic in _BINARY:
        start = tokens.pos + 1  # exactly one whitespace byte ends the header
        if tokens.pos >= len(data) or data[tokens.pos:tokens.pos + 1] not in _WHITESPACE:
            raise PnmHeaderError("Missing whitespace after maxval", tokens.pos)
        payload = data[start:start + expected]
        if len(payload) < expected:
            raise PnmTruncatedError(expected, len(payload), start)
        samples = np.frombuffer(payload, dtype=np.uint8).astype(np.float64)
    else:
        values: List[int] = []
        start = tokens.pos
        for _ in range(expected):
            token, offset = tokens.next()
            if not token:
                raise PnmTruncatedError(expected, len(values), start, unit="samples")
            if not token.isdigit():
                raise PnmHeaderError(f"Invalid sample {token.decode('latin-1')!r}", offset)
            value = int(token)
            if value > MAXVAL:
                raise PnmMaxvalError(f"Sample {value} exceeds maxval {MAXVAL}", offset)
            values.append(value)
        samples = np.asarray(values, dtype=np.float64)
    pixels = samples.reshape(height, width, channels) / MAXVAL
    if channels == 3:
        return pixels @ LUMA
    return pixels[:, :, 0]


def load_pnm(path) -> np.ndarray:
    """Read a PGM/PPM file as a (height, width) array in [0, 1]"""
    data = Path(path).read_bytes()
    image = parse_pnm(data)
    logger.debug("Loaded %s: %dx%d", path, image.shape[1], image.shape[0])
    return image


def encode_pnm(image, binary: bool = True) -> bytes:
    """
    Encode a grayscale image in [0, 1] as P5 (binary) or P2 (ASCII)

    Raises:
        ConfigError: Values outside [0, 1]; clip explicitly before writing
    """
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise ConfigError(f"Expected a non-empty 2-D image, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise ConfigError("Image values must lie in [0, 1]")
    pixels = np.rint(arr * MAXVAL).astype(np.uint8)
    height, width = arr.shape
    if binary:
        return f"P5\n{width} {height}\n{MAXVAL}\n".encode("ascii") + pixels.tobytes()
    rows = "\n".join(" ".join(str(v) for v in row) for row in pixels)
    return f"P2\n{width} {height}\n{MAXVAL}\n{rows}\n".encode("ascii")


def write_pnm(path, image, binary: bool = True) -> None:
    Path(path).write_bytes(encode_pnm(image, binary))

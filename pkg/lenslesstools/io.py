"""Reading and writing volumes, frames, images, manifests and metric tables."""

import contextlib
import os
import shutil
import tempfile

import numpy as np
import pandas as pd

MAGIC = b"LLV1"
PGM_MAXVAL = 65535


class FormatError(OSError):
    """A file does not follow the expected binary format"""


def write_llv(path, array):
    """Write a 3D float64 array in the LLV1 format

    The file holds the magic line `LLV1`, an ASCII header line with the three
    dimensions, then the little-endian float64 payload in C order.
    """
    array = np.asarray(array, dtype="<f8")
    if array.ndim != 3:
        raise ValueError("Expected a 3D array, got shape {}".format(array.shape))
    header = MAGIC + b"\n" + "{} {} {}\n".format(*array.shape).encode("ascii")
    with open(path, "wb") as handle:
        handle.write(header)
        handle.write(np.ascontiguousarray(array).tobytes())


def read_llv(path, shape=None):
    """Read an LLV1 file

    Parameters
    ----------
    path : `str`

    shape : tuple of `int`, optional
        Expected dimensions

    Returns
    -------
    array : array-like, shape=[n, rows, cols]

    Raises
    ------
    FormatError : bad magic, header or payload length
    """
    with open(path, "rb") as handle:
        content = handle.read()
    lines = content.split(b"\n", 2)
    if len(lines) < 3 or lines[0] != MAGIC:
        raise FormatError("{} is not an LLV1 file".format(path))
    try:
        dims = tuple(int(token) for token in lines[1].decode("ascii").split())
    except (UnicodeDecodeError, ValueError):
        raise FormatError("{} has an unreadable LLV1 header".format(path))
    if len(dims) != 3 or min(dims) < 0:
        raise FormatError(
            "{} header must hold three dimensions, got {!r}".format(path, lines[1])
        )
    payload = lines[2]
    expected = int(np.prod(dims)) * 8
    if len(payload) != expected:
        raise FormatError(
            "{} payload has {} bytes, expected {} for shape {}".format(
                path, len(payload), expected, dims
            )
        )
    if shape is not None and tuple(shape) != dims:
        raise FormatError(
            "{} has shape {}, expected {}".format(path, dims, tuple(shape))
        )
    return np.frombuffer(payload, dtype="<f8").reshape(dims).astype(float)


def write_pgm(path, image, comment=None):
    """Write a 16-bit binary PGM (P5)

    Parameters
    ----------
    image : array-like of int, shape=[rows, cols]
        Values in [0, 65535]

    comment : `str`, optional
        Single header comment line
    """
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError("Expected a 2D image, got shape {}".format(image.shape))
    if np.any(image < 0) or np.any(image > PGM_MAXVAL):
        raise ValueError("PGM values must lie in [0, {}]".format(PGM_MAXVAL))
    header = b"P5\n"
    if comment is not None:
        header += "# {}\n".format(comment).encode("ascii")
    header += "{} {}\n{}\n".format(image.shape[1], image.shape[0], PGM_MAXVAL).encode(
        "ascii"
    )
    with open(path, "wb") as handle:
        handle.write(header)
        handle.write(np.round(image).astype(">u2").tobytes())


def read_pgm(path):
    """Read an 8- or 16-bit binary PGM

    Returns
    -------
    image : array-like of int, shape=[rows, cols]

    maxval : `int`

    comments : list of `str`

    Raises
    ------
    FormatError : not a binary PGM or truncated
    """
    with open(path, "rb") as handle:
        content = handle.read()
    if not content.startswith(b"P5"):
        raise FormatError("{} is not a binary PGM".format(path))
    tokens, comments = [], []
    position = 2
    while len(tokens) < 3:
        while position < len(content) and content[position : position + 1].isspace():
            position += 1
        if position >= len(content):
            raise FormatError("{} has a truncated PGM header".format(path))
        if content[position : position + 1] == b"#":
            end = content.find(b"\n", position)
            end = len(content) if end < 0 else end
            comments.append(content[position + 1 : end].decode("ascii", "replace").strip())
            position = end
            continue
        start = position
        while position < len(content) and not content[position : position + 1].isspace():
            position += 1
        tokens.append(content[start:position])
    # single whitespace byte separates the header from the raster
    position += 1
    try:
        width, height, maxval = (int(token) for token in tokens)
    except ValueError:
        raise FormatError("{} has a malformed PGM header".format(path))
    if not 0 < maxval <= PGM_MAXVAL or width <= 0 or height <= 0:
        raise FormatError("{} has invalid PGM dimensions or maxval".format(path))
    dtype = ">u1" if maxval < 256 else ">u2"
    expected = width * height * np.dtype(dtype).itemsize
    raster = content[position : position + expected]
    if len(raster) != expected:
        raise FormatError(
            "{} raster has {} bytes, expected {}".format(path, len(raster), expected)
        )
    image = np.frombuffer(raster, dtype=dtype).reshape(height, width).astype(int)
    return image, maxval, comments


def write_depth_pgm(path, depth_map, depth_range):
    """Depth map as PGM: 0 is invalid, 1..65535 span `depth_range` (cm)"""
    low, high = depth_range
    scale = (depth_map.depths - low) / (high - low) if high > low else 0 * depth_map.depths
    values = 1 + np.clip(np.nan_to_num(scale), 0, 1) * (PGM_MAXVAL - 1)
    values = np.where(depth_map.valid, values, 0)
    write_pgm(path, values, comment="depth_cm {} {}".format(low, high))


def write_image_pgm(path, image):
    """Nonnegative image as PGM scaled so that its maximum maps to 65535"""
    image = np.asarray(image, dtype=float)
    peak = float(image.max()) if image.size else 0.0
    values = image / peak * PGM_MAXVAL if peak > 0 else np.zeros_like(image)
    write_pgm(path, np.clip(values, 0, PGM_MAXVAL), comment="peak {!r}".format(peak))


def write_manifest(path, entries):
    """Sorted `key = value` lines"""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for key in sorted(entries):
            handle.write("{} = {}\n".format(key, format_value(entries[key])))


def read_manifest(path):
    entries = {}
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            entries[key.strip()] = value.strip()
    return entries


def format_value(value):
    """Canonical text form of a configuration or manifest value"""
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "none"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (list, tuple, np.ndarray)):
        return ", ".join(format_value(v) for v in np.asarray(value).tolist())
    return str(value)


def write_csv(path, rows, columns):
    """Metrics table as RFC 4180 CSV with CRLF line endings"""
    table = pd.DataFrame(list(rows), columns=columns)
    table.to_csv(path, index=False, lineterminator="\r\n", float_format="%.6f")
    return table


def read_csv(path):
    return pd.read_csv(path)


@contextlib.contextmanager
def atomic_output_dir(out_dir):
    """Stage outputs in a temporary directory and move them into `out_dir`

    Nothing reaches `out_dir` unless the block finishes without error.
    """
    out_dir = os.path.abspath(out_dir)
    parent = os.path.dirname(out_dir)
    os.makedirs(parent, exist_ok=True)
    staging = tempfile.mkdtemp(prefix=".staging-", dir=parent)
    try:
        yield staging
        os.makedirs(out_dir, exist_ok=True)
        for name in sorted(os.listdir(staging)):
            os.replace(os.path.join(staging, name), os.path.join(out_dir, name))
    finally:
        shutil.rmtree(staging, ignore_errors=True)

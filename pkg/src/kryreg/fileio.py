"""File formats used by the experiment harness.

* Matrix Market text files (``array`` and ``coordinate``, real general)
  for matrices and vectors; values are written with ``repr`` so a
  write/read round trip reproduces every double bit-for-bit.
* Binary PGM (P5) images with ``maxval`` 65535 and big-endian 16-bit
  samples.  Pixel values are mapped linearly from ``[vmin, vmax]`` to
  ``[0, 65535]``; the bounds are recorded in a ``<name>.meta`` sidecar so
  the mapping can be inverted exactly.
"""

from __future__ import annotations

import numpy as np

_MM_ARRAY_HEADER = "%%MatrixMarket matrix array real general"
_MM_COORD_HEADER = "%%MatrixMarket matrix coordinate real general"


def write_matrix_market(path, a) -> None:
    """Write a dense matrix (or vector) in Matrix Market array format."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2:
        raise ValueError(f"expected a 1-d or 2-d array, got shape {a.shape}")
    lines = [_MM_ARRAY_HEADER, f"{a.shape[0]} {a.shape[1]}"]
    # array format stores entries column by column
    lines.extend(repr(float(x)) for x in a.T.ravel())
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_matrix_market(path) -> np.ndarray:
    """Read a real general Matrix Market file (array or coordinate)."""
    with open(path) as fh:
        header = fh.readline().strip()
        fields = header.lower().split()
        if len(fields) < 5 or fields[0] != "%%matrixmarket" or fields[1] != "matrix":
            raise ValueError(f"{path}: not a Matrix Market matrix file")
        fmt, scalar, symmetry = fields[2], fields[3], fields[4]
        if scalar != "real" or symmetry != "general":
            raise ValueError(f"{path}: only 'real general' files are supported")
        line = fh.readline()
        while line.startswith("%"):
            line = fh.readline()
        sizes = line.split()
        if fmt == "array":
            rows, cols = int(sizes[0]), int(sizes[1])
            data = np.loadtxt(fh, dtype=np.float64, ndmin=1)
            if data.size != rows * cols:
                raise ValueError(f"{path}: expected {rows * cols} entries, got {data.size}")
            return data.reshape(cols, rows).T
        if fmt == "coordinate":
            rows, cols, nnz = int(sizes[0]), int(sizes[1]), int(sizes[2])
            out = np.zeros((rows, cols))
            entries = np.loadtxt(fh, dtype=np.float64, ndmin=2)
            if entries.shape[0] != nnz:
                raise ValueError(f"{path}: expected {nnz} entries, got {entries.shape[0]}")
            for i, j, v in entries:
                out[int(i) - 1, int(j) - 1] = v
            return out
        raise ValueError(f"{path}: unsupported Matrix Market format '{fmt}'")


def write_pgm(path, image) -> None:
    """Write a 2-d array as a 16-bit P5 PGM plus a ``.meta`` sidecar."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError(f"expected a 2-d image, got shape {image.shape}")
    vmin = float(image.min())
    vmax = float(image.max())
    if vmax > vmin:
        quantized = np.round((image - vmin) / (vmax - vmin) * 65535.0)
    else:
        quantized = np.zeros_like(image)
    samples = quantized.astype(">u2")
    header = f"P5\n{image.shape[1]} {image.shape[0]}\n65535\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(samples.tobytes())
    with open(f"{path}.meta", "w", newline="\n") as fh:
        fh.write(f"vmin = {vmin!r}\nvmax = {vmax!r}\n")


def read_pgm(path) -> np.ndarray:
    """Read a PGM written by :func:`write_pgm`, undoing the linear map."""
    with open(path, "rb") as fh:
        if fh.readline().strip() != b"P5":
            raise ValueError(f"{path}: not a binary PGM file")
        dims = fh.readline().split()
        width, height = int(dims[0]), int(dims[1])
        maxval = int(fh.readline())
        if maxval != 65535:
            raise ValueError(f"{path}: expected maxval 65535, got {maxval}")
        samples = np.frombuffer(fh.read(2 * width * height), dtype=">u2")
    quantized = samples.astype(np.float64).reshape(height, width)
    meta = {}
    with open(f"{path}.meta") as fh:
        for line in fh:
            key, _, value = line.partition("=")
            meta[key.strip()] = float(value)
    vmin, vmax = meta["vmin"], meta["vmax"]
    if vmax > vmin:
        return vmin + quantized / 65535.0 * (vmax - vmin)
    return np.full((height, width), vmin)

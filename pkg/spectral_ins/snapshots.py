import logging
from pathlib import Path

import numpy as np

from spectral_ins import constants
from spectral_ins import errors
from spectral_ins import spectral

logger = logging.getLogger(__name__)

HEADER = np.dtype(
    [
        ("magic", "S4"),
        ("version", "<u4"),
        ("n", "<u4"),
        ("N", "<u4"),
        ("components", "<u4"),
        ("L", "<f8"),
    ]
)


def encode(grid: spectral.Grid, samples: np.ndarray) -> bytes:
    """Header plus row-major little-endian f64 samples, one block per component."""
    samples = np.asarray(samples, dtype=float).reshape((-1,) + grid.shape)
    header = np.array(
        [
            (
                constants.SNAPSHOT_MAGIC,
                constants.SNAPSHOT_VERSION,
                grid.n,
                grid.N,
                samples.shape[0],
                grid.L,
            )
        ],
        dtype=HEADER,
    )
    return header.tobytes() + np.ascontiguousarray(samples, dtype="<f8").tobytes()


def decode(content: bytes):
    if len(content) < HEADER.itemsize:
        raise errors.InvalidInputError("snapshot shorter than its header")
    header = np.frombuffer(content[: HEADER.itemsize], dtype=HEADER)[0]
    if header["magic"] != constants.SNAPSHOT_MAGIC:
        raise errors.InvalidInputError(f"bad snapshot magic {header['magic']!r}")
    if header["version"] != constants.SNAPSHOT_VERSION:
        raise errors.InvalidInputError(f"unsupported snapshot version {header['version']}")
    grid = spectral.Grid(int(header["n"]), int(header["N"]), float(header["L"]))
    components = int(header["components"])
    payload = np.frombuffer(content[HEADER.itemsize :], dtype="<f8")
    expected = components * grid.points
    if payload.size != expected:
        raise errors.InvalidInputError(
            f"snapshot payload holds {payload.size} samples, expected {expected}"
        )
    return grid, payload.reshape((components,) + grid.shape).astype(float)


def write(path, grid, samples):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(encode(grid, samples))
    logger.info(f"wrote snapshot {path}")


def read(path):
    with open(path, "rb") as f:
        return decode(f.read())


def write_field(path, field: spectral.SpectralField):
    write(path, field.grid, field.physical)


def read_field(path, shape=None) -> spectral.SpectralField:
    grid, samples = read(path)
    if shape is not None:
        samples = samples.reshape(tuple(shape) + grid.shape)
    elif samples.shape[0] == 1:
        samples = samples[0]
    return spectral.SpectralField.from_physical(grid, samples)

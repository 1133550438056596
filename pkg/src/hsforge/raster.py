"""Flat-binary raster I/O with ASCII headers, plus patching and upsampling.

A raster is a ``<stem>.img`` payload — raw little-endian values,
band-sequential (all of band 1, then band 2, ...), row-major within each
band, no padding — described by a ``<stem>.hdr`` text file of
``key = value`` lines.  Required keys: ``samples`` (columns), ``lines``
(rows), ``bands``, ``data type`` (4 = float32, 1 = uint8, 12 = uint16),
``interleave = bsq``, ``byte order = 0``.  Optional ``band names = {...}``
and ``wavelength = {...}`` carry comma-separated metadata lists.  Round
trips are bit-exact, including the metadata.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .errors import RasterFormatError, ShapeError

__all__ = [
    "RasterCube",
    "write_raster",
    "read_raster",
    "crop_patches",
    "nn_upsample_2x",
]

_DTYPE_TO_CODE = {"float32": 4, "uint8": 1, "uint16": 12}
_CODE_TO_DTYPE = {code: np.dtype(name) for name, code in _DTYPE_TO_CODE.items()}


@dataclass
class RasterCube:
    """(rows, cols, bands) array with optional band names and wavelengths."""

    data: NDArray
    band_names: tuple[str, ...] | None = None
    wavelengths: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        data = np.asarray(self.data)
        if data.ndim != 3:
            raise ShapeError(f"raster data must be (rows, cols, bands), got {data.shape}")
        if data.dtype.name not in _DTYPE_TO_CODE:
            raise RasterFormatError(
                f"unsupported raster dtype {data.dtype}; "
                f"supported: {', '.join(_DTYPE_TO_CODE)}"
            )
        self.data = data
        if self.band_names is not None:
            self.band_names = tuple(self.band_names)
            if len(self.band_names) != data.shape[2]:
                raise ShapeError(
                    f"{len(self.band_names)} band names for {data.shape[2]} bands"
                )
        if self.wavelengths is not None:
            self.wavelengths = tuple(float(w) for w in self.wavelengths)
            if len(self.wavelengths) != data.shape[2]:
                raise ShapeError(
                    f"{len(self.wavelengths)} wavelengths for {data.shape[2]} bands"
                )

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def bands(self) -> int:
        return self.data.shape[2]


def write_raster(cube: RasterCube, path_stem: str | Path) -> tuple[Path, Path]:
    """Write ``<stem>.img`` + ``<stem>.hdr``; returns the two paths."""
    stem = Path(path_stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    img_path = stem.parent / (stem.name + ".img")
    hdr_path = stem.parent / (stem.name + ".hdr")

    banded = np.ascontiguousarray(np.moveaxis(cube.data, 2, 0))
    little = banded.astype(banded.dtype.newbyteorder("<"), copy=False)
    img_path.write_bytes(little.tobytes())

    lines = [
        f"samples = {cube.cols}",
        f"lines = {cube.rows}",
        f"bands = {cube.bands}",
        f"data type = {_DTYPE_TO_CODE[cube.data.dtype.name]}",
        "interleave = bsq",
        "byte order = 0",
    ]
    if cube.band_names is not None:
        lines.append("band names = {" + ", ".join(cube.band_names) + "}")
    if cube.wavelengths is not None:
        lines.append("wavelength = {" + ", ".join(repr(w) for w in cube.wavelengths) + "}")
    hdr_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return img_path, hdr_path


def _parse_header(hdr_path: Path) -> dict[str, str]:
    text = hdr_path.read_text(encoding="utf-8")
    entries: dict[str, str] = {}
    pending_key: str | None = None
    pending_value: list[str] = []
    for raw in text.splitlines():
        line = raw.strip()
        if pending_key is not None:
            pending_value.append(line)
            if "}" in line:
                entries[pending_key] = " ".join(pending_value)
                pending_key, pending_value = None, []
            continue
        if not line or "=" not in line:
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.lower()
        if value.startswith("{") and "}" not in value:
            pending_key, pending_value = key, [value]
        else:
            entries[key] = value
    if pending_key is not None:
        raise RasterFormatError(f"{hdr_path}: unterminated '{{' list for key {pending_key!r}")
    return entries


def _parse_list(value: str, hdr_path: Path, key: str) -> list[str]:
    value = value.strip()
    if not (value.startswith("{") and value.endswith("}")):
        raise RasterFormatError(f"{hdr_path}: {key} must be a {{...}} list")
    inner = value[1:-1].strip()
    return [item.strip() for item in inner.split(",")] if inner else []


def read_raster(path_stem: str | Path) -> RasterCube:
    """Read ``<stem>.img`` + ``<stem>.hdr`` back into a :class:`RasterCube`."""
    stem = Path(path_stem)
    img_path = stem.parent / (stem.name + ".img")
    hdr_path = stem.parent / (stem.name + ".hdr")
    for p in (hdr_path, img_path):
        if not p.is_file():
            raise RasterFormatError(f"missing raster file: {p}")

    entries = _parse_header(hdr_path)
    try:
        cols = int(entries["samples"])
        rows = int(entries["lines"])
        bands = int(entries["bands"])
        type_code = int(entries["data type"])
    except KeyError as missing:
        raise RasterFormatError(f"{hdr_path}: missing required key {missing}") from None
    except ValueError:
        raise RasterFormatError(f"{hdr_path}: non-integer size or type field") from None
    if min(rows, cols, bands) < 1:
        raise RasterFormatError(f"{hdr_path}: sizes must be positive")
    if entries.get("interleave", "bsq").lower() != "bsq":
        raise RasterFormatError(f"{hdr_path}: only bsq interleave is supported")
    if entries.get("byte order", "0").strip() != "0":
        raise RasterFormatError(f"{hdr_path}: only little-endian (byte order = 0) is supported")
    if type_code not in _CODE_TO_DTYPE:
        raise RasterFormatError(f"{hdr_path}: unknown data type code {type_code}")
    dtype = _CODE_TO_DTYPE[type_code]

    payload = img_path.read_bytes()
    expected = rows * cols * bands * dtype.itemsize
    if len(payload) != expected:
        raise RasterFormatError(
            f"{img_path}: payload is {len(payload)} bytes, header implies {expected}"
        )
    banded = np.frombuffer(payload, dtype=dtype.newbyteorder("<")).reshape(bands, rows, cols)
    data = np.ascontiguousarray(np.moveaxis(banded, 0, 2)).astype(dtype, copy=False)

    band_names = None
    if "band names" in entries:
        band_names = tuple(_parse_list(entries["band names"], hdr_path, "band names"))
    wavelengths = None
    if "wavelength" in entries:
        try:
            wavelengths = tuple(
                float(v) for v in _parse_list(entries["wavelength"], hdr_path, "wavelength")
            )
        except ValueError:
            raise RasterFormatError(f"{hdr_path}: non-numeric wavelength entry") from None
    return RasterCube(data=data, band_names=band_names, wavelengths=wavelengths)


def crop_patches(cube: RasterCube, patch_rows: int, patch_cols: int) -> list[RasterCube]:
    """Non-overlapping row-major grid of full patches; partial edges dropped."""
    if patch_rows < 1 or patch_cols < 1:
        raise ShapeError(f"patch sizes must be positive, got ({patch_rows}, {patch_cols})")
    if patch_rows > cube.rows or patch_cols > cube.cols:
        raise ShapeError(
            f"patch ({patch_rows}, {patch_cols}) larger than raster "
            f"({cube.rows}, {cube.cols})"
        )
    patches = []
    for i in range(cube.rows // patch_rows):
        for j in range(cube.cols // patch_cols):
            window = cube.data[
                i * patch_rows : (i + 1) * patch_rows,
                j * patch_cols : (j + 1) * patch_cols,
            ]
            patches.append(
                RasterCube(
                    data=window.copy(),
                    band_names=cube.band_names,
                    wavelengths=cube.wavelengths,
                )
            )
    return patches


def nn_upsample_2x(patch: RasterCube) -> RasterCube:
    """Nearest-neighbor 2x upsampling of a 32x32 patch to 64x64.

    ``output[i, j] = input[i // 2, j // 2]`` for every band.
    """
    if patch.rows != 32 or patch.cols != 32:
        raise ShapeError(f"expected a 32x32 patch, got ({patch.rows}, {patch.cols})")
    upsampled = np.repeat(np.repeat(patch.data, 2, axis=0), 2, axis=1)
    return RasterCube(
        data=upsampled, band_names=patch.band_names, wavelengths=patch.wavelengths
    )

import numpy as np
import pytest

import hsforge as hf
from hsforge import RasterCube, RasterFormatError, ShapeError


def _cube(rng, rows=6, cols=5, bands=4, dtype=np.float32, **meta):
    if np.issubdtype(dtype, np.floating):
        data = rng.random((rows, cols, bands)).astype(dtype)
    else:
        info = np.iinfo(dtype)
        data = rng.integers(0, info.max, (rows, cols, bands), dtype=dtype)
    return RasterCube(data=data, **meta)


@pytest.mark.parametrize("dtype", [np.float32, np.uint8, np.uint16])
def test_round_trip_bit_exact(tmp_path, rng, dtype):
    cube = _cube(rng, dtype=dtype)
    hf.write_raster(cube, tmp_path / "t")
    back = hf.read_raster(tmp_path / "t")
    assert back.data.dtype == np.dtype(dtype)
    assert np.array_equal(back.data, cube.data)
    assert back.data.tobytes() == cube.data.tobytes()
    assert back.band_names is None and back.wavelengths is None


def test_round_trip_with_metadata(tmp_path, rng):
    cube = _cube(rng, bands=3, band_names=("cab", "cw", "lai"),
                 wavelengths=(442.5, 560.0, 665.25))
    hf.write_raster(cube, tmp_path / "meta")
    back = hf.read_raster(tmp_path / "meta")
    assert back.band_names == ("cab", "cw", "lai")
    assert back.wavelengths == (442.5, 560.0, 665.25)
    assert np.array_equal(back.data, cube.data)


def test_write_creates_img_and_hdr(tmp_path, rng):
    img, hdr = hf.write_raster(_cube(rng), tmp_path / "sub" / "x")
    assert img.name == "x.img" and hdr.name == "x.hdr"
    assert img.is_file() and hdr.is_file()
    text = hdr.read_text()
    assert "samples = 5" in text
    assert "lines = 6" in text
    assert "bands = 4" in text
    assert "data type = 4" in text
    assert "interleave = bsq" in text
    assert "byte order = 0" in text


def test_payload_is_band_sequential(tmp_path, rng):
    cube = _cube(rng, rows=2, cols=3, bands=2)
    img, _ = hf.write_raster(cube, tmp_path / "b")
    raw = np.frombuffer(img.read_bytes(), dtype="<f4")
    # first rows*cols values are band 0 in row-major order
    assert np.array_equal(raw[:6], cube.data[:, :, 0].ravel())
    assert np.array_equal(raw[6:], cube.data[:, :, 1].ravel())


def test_dotted_stem_keeps_full_name(tmp_path, rng):
    cube = _cube(rng)
    img, hdr = hf.write_raster(cube, tmp_path / "a.b")
    assert img.name == "a.b.img" and hdr.name == "a.b.hdr"
    back = hf.read_raster(tmp_path / "a.b")
    assert np.array_equal(back.data, cube.data)


def test_read_missing_files(tmp_path, rng):
    with pytest.raises(RasterFormatError, match="missing"):
        hf.read_raster(tmp_path / "nope")
    hf.write_raster(_cube(rng), tmp_path / "half")
    (tmp_path / "half.img").unlink()
    with pytest.raises(RasterFormatError, match="half.img"):
        hf.read_raster(tmp_path / "half")


def test_read_truncated_payload(tmp_path, rng):
    img, _ = hf.write_raster(_cube(rng), tmp_path / "cut")
    img.write_bytes(img.read_bytes()[:-3])
    with pytest.raises(RasterFormatError, match="bytes"):
        hf.read_raster(tmp_path / "cut")


def _mangle_header(tmp_path, rng, key, value):
    _, hdr = hf.write_raster(_cube(rng), tmp_path / "m")
    lines = []
    for line in hdr.read_text().splitlines():
        if line.startswith(key + " ="):
            line = f"{key} = {value}"
        lines.append(line)
    hdr.write_text("\n".join(lines) + "\n")
    return tmp_path / "m"


@pytest.mark.parametrize(
    "key,value,needle",
    [
        ("data type", "99", "data type"),
        ("data type", "four", "non-integer"),
        ("interleave", "bil", "bsq"),
        ("byte order", "1", "little-endian"),
        ("samples", "0", "positive"),
        ("samples", "7", "bytes"),  # size mismatch against the payload
    ],
)
def test_read_rejects_malformed_headers(tmp_path, rng, key, value, needle):
    stem = _mangle_header(tmp_path, rng, key, value)
    with pytest.raises(RasterFormatError, match=needle):
        hf.read_raster(stem)


def test_read_rejects_missing_required_key(tmp_path, rng):
    _, hdr = hf.write_raster(_cube(rng), tmp_path / "k")
    hdr.write_text(
        "\n".join(
            l for l in hdr.read_text().splitlines() if not l.startswith("bands")
        )
        + "\n"
    )
    with pytest.raises(RasterFormatError, match="bands"):
        hf.read_raster(tmp_path / "k")


def test_read_rejects_unterminated_list(tmp_path, rng):
    _, hdr = hf.write_raster(_cube(rng, bands=2), tmp_path / "u")
    with open(hdr, "a") as fh:
        fh.write("band names = {one, two\n")
    with pytest.raises(RasterFormatError, match="unterminated"):
        hf.read_raster(tmp_path / "u")


def test_read_rejects_non_numeric_wavelength(tmp_path, rng):
    _, hdr = hf.write_raster(_cube(rng, bands=2), tmp_path / "w")
    with open(hdr, "a") as fh:
        fh.write("wavelength = {500.0, blue}\n")
    with pytest.raises(RasterFormatError, match="wavelength"):
        hf.read_raster(tmp_path / "w")


def test_cube_validation(rng):
    with pytest.raises(ShapeError):
        RasterCube(data=np.zeros((4, 4), dtype=np.float32))
    with pytest.raises(RasterFormatError, match="float64"):
        RasterCube(data=np.zeros((2, 2, 2), dtype=np.float64))
    with pytest.raises(ShapeError):
        RasterCube(data=np.zeros((2, 2, 3), dtype=np.float32), band_names=("a",))
    with pytest.raises(ShapeError):
        RasterCube(data=np.zeros((2, 2, 3), dtype=np.float32), wavelengths=(1.0,))


@pytest.mark.parametrize("rows,cols,expected", [(128, 128, 4), (130, 131, 4), (64, 64, 1)])
def test_crop_patches_counts(rng, rows, cols, expected):
    cube = RasterCube(data=rng.random((rows, cols, 2)).astype(np.float32))
    patches = hf.crop_patches(cube, 64, 64)
    assert len(patches) == expected
    for p in patches:
        assert p.rows == 64 and p.cols == 64


def test_crop_patches_row_major_content(rng):
    cube = RasterCube(
        data=rng.random((8, 8, 1)).astype(np.float32),
        band_names=("B1",),
    )
    patches = hf.crop_patches(cube, 4, 4)
    assert len(patches) == 4
    assert np.array_equal(patches[0].data, cube.data[:4, :4])
    assert np.array_equal(patches[1].data, cube.data[:4, 4:])
    assert np.array_equal(patches[2].data, cube.data[4:, :4])
    assert np.array_equal(patches[3].data, cube.data[4:, 4:])
    assert patches[0].band_names == ("B1",)
    # patches own their memory
    patches[0].data[0, 0, 0] = -1
    assert cube.data[0, 0, 0] != -1


def test_crop_patches_rejects_bad_sizes(rng):
    cube = RasterCube(data=rng.random((8, 8, 1)).astype(np.float32))
    with pytest.raises(ShapeError):
        hf.crop_patches(cube, 0, 4)
    with pytest.raises(ShapeError):
        hf.crop_patches(cube, 9, 4)


def test_nn_upsample_hot_pixel(rng):
    data = np.zeros((32, 32, 3), dtype=np.float32)
    data[5, 9, :] = 7.0
    big = hf.nn_upsample_2x(RasterCube(data=data))
    assert big.rows == 64 and big.cols == 64 and big.bands == 3
    hot = np.argwhere(big.data[:, :, 0] == 7.0)
    assert sorted(map(tuple, hot)) == [(10, 18), (10, 19), (11, 18), (11, 19)]


def test_nn_upsample_index_oracle(rng):
    patch = RasterCube(
        data=rng.random((32, 32, 2)).astype(np.float32),
        wavelengths=(500.0, 600.0),
    )
    big = hf.nn_upsample_2x(patch)
    for i in range(64):
        for j in range(64):
            assert np.array_equal(big.data[i, j], patch.data[i // 2, j // 2])
    assert big.wavelengths == (500.0, 600.0)
    # decimation is an exact inverse
    assert np.array_equal(big.data[::2, ::2], patch.data)


def test_nn_upsample_rejects_wrong_size(rng):
    with pytest.raises(ShapeError):
        hf.nn_upsample_2x(RasterCube(data=np.zeros((31, 32, 1), dtype=np.float32)))

import math

import numpy as np
import pytest

from metamorph.fileio import (
    read_gated_bundle,
    read_image_raw,
    read_sinogram,
    write_gated_bundle,
    write_image_raw,
    write_pgm,
    write_sinogram,
)
from metamorph.grid import GridSpec, Image
from metamorph.ray import Geometry, Sinogram


def test_image_raw_roundtrip_exact(tmp_path):
    spec = GridSpec(16.0, 32, 32)
    rng = np.random.default_rng(0)
    img = Image(spec, rng.normal(size=spec.shape))
    path = tmp_path / "img.mimg"
    write_image_raw(img, path)
    assert path.stat().st_size == 16 + 32 * 32 * 8
    back = read_image_raw(path)
    assert back.spec == spec
    assert np.array_equal(back.values, img.values)


def test_image_raw_rejects_garbage(tmp_path):
    path = tmp_path / "junk.mimg"
    path.write_bytes(b"NOPE" + b"\x00" * 20)
    with pytest.raises(ValueError):
        read_image_raw(path)
    path.write_bytes(b"MIMG" + b"\x00" * 8)
    with pytest.raises(Exception):
        read_image_raw(path)


def test_pgm_header_and_range(tmp_path):
    spec = GridSpec(16.0, 16, 16)
    img = Image.from_function(spec, lambda x, y: x)
    path = tmp_path / "img.pgm"
    write_pgm(img, path)
    blob = path.read_bytes()
    assert blob.startswith(b"P5\n16 16\n65535\n")
    pixels = np.frombuffer(blob.split(b"65535\n", 1)[1], dtype=">u2")
    assert pixels.min() == 0 and pixels.max() == 65535


def test_pgm_constant_image(tmp_path):
    spec = GridSpec(16.0, 16, 16)
    path = tmp_path / "flat.pgm"
    write_pgm(Image.full(spec, 3.0), path)
    pixels = np.frombuffer(path.read_bytes().split(b"65535\n", 1)[1], dtype=">u2")
    assert np.all(pixels == 0)


def test_sinogram_roundtrip(tmp_path):
    geo = Geometry(np.array([0.1, 0.7, 2.2]), 24, 20.0)
    rng = np.random.default_rng(1)
    sino = Sinogram(geo, rng.normal(size=(3, 24)))
    path = tmp_path / "data.sino"
    write_sinogram(sino, path)
    back = read_sinogram(path, det_extent=20.0)
    assert np.array_equal(back.geometry.angles, geo.angles)
    assert back.geometry.n_det == 24
    assert np.array_equal(back.values, sino.values)


def test_sinogram_rejects_garbage(tmp_path):
    path = tmp_path / "junk.sino"
    path.write_bytes(b"XXXX")
    with pytest.raises(ValueError):
        read_sinogram(path, det_extent=20.0)


def test_gated_bundle_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    gates = []
    for k, n_angles in ((2, 4), (5, 6)):
        geo = Geometry(np.sort(rng.uniform(0, np.pi, n_angles)), 16, 22.0)
        gates.append((k, Sinogram(geo, rng.normal(size=(n_angles, 16)))))
    out = tmp_path / "bundle"
    write_gated_bundle(out, gates, seed=99)
    assert (out / "gates.toml").exists()
    assert (out / "gate_1.sino").exists()
    back = read_gated_bundle(out)
    assert [k for k, _ in back] == [2, 5]
    for (k0, s0), (k1, s1) in zip(gates, back):
        assert np.array_equal(s0.values, s1.values)
        assert np.array_equal(s0.geometry.angles, s1.geometry.angles)
        assert s1.geometry.det_extent == 22.0
    text = (out / "gates.toml").read_text()
    assert "seed = 99" in text


def test_atomic_write_leaves_no_temp_files(tmp_path):
    spec = GridSpec(16.0, 8, 8)
    write_image_raw(Image.zeros(spec), tmp_path / "a.mimg")
    leftovers = [p for p in tmp_path.iterdir() if p.suffix == ".tmp"]
    assert leftovers == []

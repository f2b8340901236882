import numpy as np
import pytest

from gcml.errors import DataError
from gcml.netpbm import load_pgm_ppm, save_pgm, save_ppm


def test_hand_encoded_p5_fixture(tmp_path):
    path = tmp_path / "tiny.pgm"
    path.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 255, 128, 64]))
    img = load_pgm_ppm(path).data
    assert img.shape == (1, 2, 2)
    want = np.array([[0, 255], [128, 64]]) / 255.0
    assert np.abs(img[0] - want).max() < 1e-7


def test_single_white_pixel_is_one(tmp_path):
    path = tmp_path / "white.pgm"
    path.write_bytes(b"P5\n1 1\n255\n\xff")
    assert load_pgm_ppm(path).data[0, 0, 0] == 1.0


def test_pgm_round_trip_quantization_bound(tmp_path):
    rng = np.random.default_rng(0)
    img = rng.random((1, 7, 9)).astype(np.float32)
    path = tmp_path / "rt.pgm"
    save_pgm(path, img)
    back = load_pgm_ppm(path).data
    assert np.abs(back - img).max() <= 1 / 510 + 1e-9


def test_ppm_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    img = rng.random((3, 4, 5)).astype(np.float32)
    path = tmp_path / "rt.ppm"
    save_ppm(path, img)
    back = load_pgm_ppm(path).data
    assert back.shape == (3, 4, 5)
    assert np.abs(back - img).max() <= 1 / 510 + 1e-9


def test_round_half_up(tmp_path):
    # 0.5/255 rounds up to 1, just under rounds down to 0
    path = tmp_path / "r.pgm"
    save_pgm(path, np.array([[[0.5 / 255, 0.49 / 255]]]))
    blob = path.read_bytes()
    assert blob[-2:] == bytes([1, 0])


def test_header_comments_and_whitespace(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5 # comment\n# another\n 2\t1 \n255\n\x00\xff")
    img = load_pgm_ppm(path).data
    assert img.shape == (1, 1, 2)
    assert img[0, 0, 1] == 1.0


def test_bad_magic_raises(tmp_path):
    path = tmp_path / "bad.pgm"
    path.write_bytes(b"P3\n1 1\n255\n0")
    with pytest.raises(DataError):
        load_pgm_ppm(path)


def test_truncated_payload_raises(tmp_path):
    path = tmp_path / "short.pgm"
    path.write_bytes(b"P5\n2 2\n255\n\x00\x01")
    with pytest.raises(DataError, match="truncated"):
        load_pgm_ppm(path)


def test_unsupported_maxval_raises(tmp_path):
    path = tmp_path / "deep.pgm"
    path.write_bytes(b"P5\n1 1\n65535\n\x00\x00")
    with pytest.raises(DataError, match="maxval"):
        load_pgm_ppm(path)


def test_malformed_header_raises(tmp_path):
    path = tmp_path / "m.pgm"
    path.write_bytes(b"P5\nabc def\n255\n\x00")
    with pytest.raises(DataError):
        load_pgm_ppm(path)


def test_save_pgm_rejects_multichannel():
    with pytest.raises(ValueError):
        save_pgm("/tmp/x.pgm", np.zeros((3, 2, 2)))

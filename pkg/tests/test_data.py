import numpy as np
import pytest

from gcml.data import (Dataset, SyntheticSpec, generate_synthetic, load_dataset,
                       render_view, split_by_view, write_dataset)
from gcml.errors import DataError


def small_spec(**kw):
    base = dict(num_classes=4, instances_per_class=3, views_per_instance=3,
                image_size=16, seed=7)
    base.update(kw)
    return SyntheticSpec(**base)


def test_generation_is_deterministic():
    a = generate_synthetic(small_spec())
    b = generate_synthetic(small_spec())
    assert np.array_equal(a.images, b.images)
    assert a.rows == b.rows


def test_seed_changes_output():
    a = generate_synthetic(small_spec())
    b = generate_synthetic(small_spec(seed=8))
    assert not np.array_equal(a.images, b.images)


def test_counts_and_manifest_paths():
    ds = generate_synthetic(small_spec())
    assert len(ds) == 4 * 3 * 3
    assert ds.rows[0].relative_path == "class_0/inst_0/view_0.pgm"
    assert len({r.relative_path for r in ds.rows}) == len(ds)
    assert all(r.rotation_deg == 0 for r in ds.rows)


def test_single_image_dataset():
    ds = generate_synthetic(SyntheticSpec(num_classes=1, instances_per_class=1,
                                          views_per_instance=1, image_size=16, seed=1))
    assert len(ds) == 1
    assert ds.images.shape == (1, 1, 16, 16)


def test_pixel_range():
    ds = generate_synthetic(small_spec())
    assert ds.images.min() >= 0.0 and ds.images.max() <= 1.0


def test_views_differ_less_than_instances():
    """Mean intra-instance pixel distance < mean intra-class (across instances)."""
    spec = SyntheticSpec(num_classes=6, instances_per_class=5, views_per_instance=3,
                         image_size=24, seed=9)
    ds = generate_synthetic(spec)
    intra_instance = []
    intra_class = []
    for c in range(spec.num_classes):
        cls = ds.subset(np.nonzero(ds.class_ids == c)[0])
        for ident in np.unique(cls.instance_ids):
            views = cls.images[cls.instance_ids == ident]
            for i in range(len(views)):
                for j in range(i + 1, len(views)):
                    intra_instance.append(np.abs(views[i] - views[j]).mean())
        idents = np.unique(cls.instance_ids)
        for a in range(len(idents)):
            for b in range(a + 1, len(idents)):
                va = cls.images[cls.instance_ids == idents[a]][0]
                vb = cls.images[cls.instance_ids == idents[b]][0]
                intra_class.append(np.abs(va - vb).mean())
    assert np.mean(intra_instance) < np.mean(intra_class)


def test_view_transform_is_brightness_noise_jitter_only():
    spec = small_spec(noise_sigma=0.0, jitter_px=0)
    v0 = render_view(spec, 0, 0, 0)
    v1 = render_view(spec, 0, 0, 1)
    # without noise and jitter, views differ only by a brightness scale
    nz = v0 > 1e-6
    ratios = v1[nz] / v0[nz]
    clipped = (v0[nz] >= 0.999) | (v1[nz] >= 0.999)
    assert ratios[~clipped].std() < 1e-5


def test_tiny_image_size_rejected():
    with pytest.raises(DataError):
        SyntheticSpec(image_size=8)
    with pytest.raises(ValueError):
        SyntheticSpec(image_size=17)


def test_write_and_load_round_trip(tmp_path):
    ds = generate_synthetic(small_spec())
    write_dataset(ds, tmp_path)
    assert (tmp_path / "manifest.tsv").exists()
    assert (tmp_path / "class_0" / "inst_0" / "view_0.pgm").exists()
    loaded = load_dataset(tmp_path)
    assert len(loaded) == len(ds)
    assert np.array_equal(loaded.class_ids, ds.class_ids)
    assert np.array_equal(loaded.view_ids, ds.view_ids)
    # identity labels stay aligned with (class, instance) pairs
    assert np.array_equal(loaded.instance_ids, ds.instance_ids)
    # pixels within quantization of the originals
    assert np.abs(loaded.images - ds.images).max() <= 1 / 510 + 1e-9


def test_rewrite_identical_bytes(tmp_path):
    ds = generate_synthetic(small_spec())
    d1, d2 = tmp_path / "a", tmp_path / "b"
    write_dataset(ds, d1)
    write_dataset(ds, d2)
    assert (d1 / "manifest.tsv").read_bytes() == (d2 / "manifest.tsv").read_bytes()
    p = "class_1/inst_2/view_0.pgm"
    assert (d1 / p).read_bytes() == (d2 / p).read_bytes()


def test_load_missing_manifest(tmp_path):
    with pytest.raises(DataError):
        load_dataset(tmp_path / "nope")


def test_load_rejects_bad_rotation(tmp_path):
    ds = generate_synthetic(SyntheticSpec(num_classes=1, instances_per_class=1,
                                          views_per_instance=1, image_size=16, seed=1))
    write_dataset(ds, tmp_path)
    manifest = tmp_path / "manifest.tsv"
    lines = manifest.read_text().splitlines()
    lines[1] = lines[1].rsplit("\t", 1)[0] + "\t45"
    manifest.write_text("\n".join(lines) + "\n")
    with pytest.raises(DataError, match="rotation"):
        load_dataset(tmp_path)


def test_split_by_view():
    ds = generate_synthetic(small_spec())
    train = split_by_view(ds, [0, 1])
    assert set(train.view_ids.tolist()) == {0, 1}
    assert len(train) == 4 * 3 * 2

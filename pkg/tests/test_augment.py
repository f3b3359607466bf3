import numpy as np
import pytest

from vlfas.data.augment import AugmentConfig, augment_image, make_views
from vlfas.data.images import (
    IMAGE_MEAN,
    IMAGE_STD,
    load_image01,
    normalize_batch,
    normalize_image01,
)
from vlfas.data.synthetic import make_synthetic_domain
from vlfas.labels import REAL, SPOOF


@pytest.fixture
def img():
    rng = np.random.default_rng(1)
    return rng.uniform(0, 1, size=(32, 32, 3)).astype(np.float32)


def test_identity_config_returns_input(img, prompt_set, rng):
    pair = make_views(img, REAL, prompt_set, rng, AugmentConfig.identity())
    assert np.array_equal(pair.view1, img)
    assert np.array_equal(pair.view2, img)
    assert pair.view1 is not img  # still a private copy


def test_fixed_seed_reproducible(img, prompt_set):
    pair_a = make_views(img, SPOOF, prompt_set, np.random.default_rng(5))
    pair_b = make_views(img, SPOOF, prompt_set, np.random.default_rng(5))
    assert np.array_equal(pair_a.view1, pair_b.view1)
    assert np.array_equal(pair_a.view2, pair_b.view2)
    assert (pair_a.prompt_view1, pair_a.prompt_view2) == (
        pair_b.prompt_view1, pair_b.prompt_view2,
    )


def test_views_differ_under_stochastic_config(img, prompt_set, rng):
    pair = make_views(img, REAL, prompt_set, rng)
    assert not np.array_equal(pair.view1, pair.view2)


def test_prompts_always_from_labeled_class(img, prompt_set):
    rng = np.random.default_rng(77)
    for i in range(1000):
        label = REAL if i % 2 == 0 else SPOOF
        pair = make_views(img, label, prompt_set, rng, AugmentConfig.identity())
        allowed = prompt_set.for_label(label)
        assert pair.prompt_view1 in allowed
        assert pair.prompt_view2 in allowed
        assert pair.prompt_view1 != pair.prompt_view2


def test_augment_preserves_shape_range_dtype(img):
    rng = np.random.default_rng(3)
    for _ in range(20):
        out = augment_image(img, AugmentConfig(), rng)
        assert out.shape == img.shape
        assert out.dtype == np.float32
        assert out.min() >= 0.0 and out.max() <= 1.0


def test_grayscale_equalizes_channels(img):
    cfg = AugmentConfig(
        crop_scale=(1.0, 1.0), crop_ratio=(1.0, 1.0),
        hflip_prob=0.0, jitter_prob=0.0, grayscale_prob=1.0,
    )
    out = augment_image(img, cfg, np.random.default_rng(0))
    assert np.array_equal(out[..., 0], out[..., 1])
    assert np.array_equal(out[..., 1], out[..., 2])


def test_hflip_only_mirrors(img):
    cfg = AugmentConfig(
        crop_scale=(1.0, 1.0), crop_ratio=(1.0, 1.0),
        hflip_prob=1.0, jitter_prob=0.0, grayscale_prob=0.0,
    )
    out = augment_image(img, cfg, np.random.default_rng(0))
    assert np.array_equal(out, img[:, ::-1, :])


def test_normalize_image_matches_formula(img):
    normalized = normalize_image01(img)
    expected = (img - np.array(IMAGE_MEAN, dtype=np.float32)) / np.array(
        IMAGE_STD, dtype=np.float32
    )
    np.testing.assert_allclose(normalized, expected, atol=1e-7)


def test_normalize_batch_layout(img):
    batch = normalize_batch([img, img])
    assert batch.shape == (2, 3, 32, 32)
    np.testing.assert_allclose(
        batch[0, 0].numpy(), normalize_image01(img)[..., 0], atol=1e-6
    )


def test_synthetic_domain_roundtrips_through_files(tmp_path):
    domain = make_synthetic_domain(str(tmp_path), "Z", n_per_class=6, image_size=32, seed=5)
    assert len(domain) == 12
    assert len(domain.by_label(REAL)) == 6
    assert domain.attack_types() == {"print", "replay"}
    img01 = load_image01(domain.samples[0].path)
    assert img01.shape == (32, 32, 3)
    assert 0.0 <= img01.min() and img01.max() <= 1.0


def test_synthetic_generation_deterministic(tmp_path):
    d1 = make_synthetic_domain(str(tmp_path / "a"), "Q", n_per_class=4, image_size=32, seed=9)
    d2 = make_synthetic_domain(str(tmp_path / "b"), "Q", n_per_class=4, image_size=32, seed=9)
    for s1, s2 in zip(d1.samples, d2.samples):
        assert s1.sample_id == s2.sample_id
        assert np.array_equal(load_image01(s1.path), load_image01(s2.path))
    d3 = make_synthetic_domain(str(tmp_path / "c"), "Q", n_per_class=4, image_size=32, seed=10)
    assert any(
        not np.array_equal(load_image01(a.path), load_image01(b.path))
        for a, b in zip(d1.samples, d3.samples)
    )

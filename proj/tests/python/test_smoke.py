"""Smoke tests for the python bindings."""

import math

import numpy as np
import pytest

import tge


def test_grid_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    array = rng.uniform(-1, 1, size=(4, 5, 8)).astype(np.float32)
    grid = tge.TokenGrid(array, tag="smoke")
    assert (grid.rows, grid.cols, grid.dim) == (4, 5, 8)
    path = str(tmp_path / "grid.tgr")
    tge.save_grid(grid, path)
    loaded = tge.load_grid(path)
    assert loaded.tag == "smoke"
    np.testing.assert_array_equal(loaded.numpy(), array)


def test_grid_rejects_non_finite():
    bad = np.full((1, 1, 2), np.nan, dtype=np.float32)
    with pytest.raises(tge.Error):
        tge.TokenGrid(bad)


def test_patch_count_and_budget():
    layout = tge.GridLayout(8064, 8064, 336, 14)
    assert tge.patch_count(layout) == (576, 576, 331776)
    assert tge.token_budget(layout, 24) == 13824
    assert tge.format_thousands(13824 + 144) == "14.0k"


def test_flops_model():
    model = tge.default_flops_model()
    assert tge.estimate_flops(model, 13824) == pytest.approx(198.06, rel=0.01)
    assert tge.estimate_flops(model, 3456) == pytest.approx(51.13, rel=0.01)


def test_pool_baseline_mean():
    array = np.arange(16, dtype=np.float32).reshape(4, 4, 1)
    pooled = tge.pool_baseline(tge.TokenGrid(array), 2)
    assert pooled.numpy().mean() == pytest.approx(array.mean())


def test_encode_and_compress():
    layout = tge.GridLayout(56, 56, 56, 14)  # 4x4 patches
    params = tge.EncoderParams.create(8, 3, 16, 42)
    rng = np.random.default_rng(0)
    pixels = rng.uniform(-1, 1, size=(56, 56)).astype(np.float32)

    out = tge.encode(pixels, params, layout)
    attention = out.cls_attention
    assert attention.shape == (16,)
    assert attention.sum() == pytest.approx(1.0, abs=1e-6)
    assert attention.min() >= 0.0

    grid = out.final_tokens(4, 4)
    retained, report = tge.compress_grid(
        grid, out, tge.AffinityConfig(), tge.SelectionConfig(budget=4)
    )
    assert retained.count == 4
    assert report["retained_token_count"] == 4
    assert report["original_token_count"] == 16
    assert sum(report["cluster_sizes"]) == 16


def test_compress_image_accounting():
    layout = tge.GridLayout(336, 336, 336, 14)
    params = tge.EncoderParams.create(16, 3, 32, 7)
    rng = np.random.default_rng(1)
    pixels = rng.uniform(-1, 1, size=(336, 336)).astype(np.float32)
    per_grid, report = tge.compress_image(
        pixels, layout, params, selection=tge.SelectionConfig(budget=24), jobs=2
    )
    assert len(per_grid) == 1
    assert report["retained_token_count"] == 24
    assert report["compression_ratio"] == pytest.approx(24.0)


def test_register_tokens():
    data = np.zeros((10, 10, 4), dtype=np.float32)
    data[:, :, 0] = 1.0
    data[3, 7, 0] = 10.0
    outliers = tge.detect_register_tokens(tge.TokenGrid(data))
    assert outliers == [3 * 10 + 7]


def test_influence_selection():
    rng = np.random.default_rng(5)
    model = tge.AdapterModel.create(16, 2, 4, 1)
    train = [
        tge.DataSample(f"t{i:02d}", rng.uniform(-1, 1, 16).astype(np.float32), i % 4)
        for i in range(10)
    ]
    val = [
        tge.DataSample(f"v{i:02d}", rng.uniform(-1, 1, 16).astype(np.float32), i % 4)
        for i in range(4)
    ]
    train_f, val_f, _ = tge.warmup_and_featurize(model, train, val, warmup_steps=4, d_out=256)
    ranking, selected = tge.rank_and_select(train_f, val_f, keep_fraction=0.7)
    assert len(selected) == 7  # ceil(0.7 * 10)
    scores = [s for _, s in ranking]
    assert scores == sorted(scores, reverse=True)
    assert all(-1.0 <= s <= 1.0 for s in scores)


def test_ablation_ordering():
    layout = tge.GridLayout(168, 168, 168, 14)  # 12x12 tokens
    rng = np.random.default_rng(11)
    dim = 8
    data = rng.uniform(-1, 1, size=(12, 12, dim)).astype(np.float32)
    # orthogonalize the background against the signal axis, then plant it
    data[:, :, 0] = 0.0
    for r, c in [(5, 5), (5, 6), (6, 5), (6, 6)]:
        data[r, c, :] = 0.0
        data[r, c, 0] = 8.0
    grid = tge.TokenGrid(data)
    corpus_mean = data.reshape(-1, dim).mean(axis=0)

    proxy = tge.AdapterModel.create(dim, 2, 4, 0)
    spec = tge.AblationSpec.object(tge.PixelBox(70, 70, 98, 98))
    ablated, indices = tge.ablate_tokens(grid, spec, corpus_mean, layout)
    assert indices == [5 * 12 + 5, 5 * 12 + 6, 6 * 12 + 5, 6 * 12 + 6]
    result = tge.degradation_metric(proxy, grid, ablated, 1)
    assert math.isfinite(result["decrease_percent"])


def test_logit_lens_identity():
    token, logits = tge.logit_lens([0.0, 1.0, 0.0], np.eye(3, dtype=np.float32))
    assert token == 1
    assert logits.argmax() == 1

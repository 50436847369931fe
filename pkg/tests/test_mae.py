"""Masking, axis-wise encoding, decoding, loss, and pre-training behavior."""

import math

import numpy as np
import pytest

import axmae.engine as eg
from axmae.data import DataError, SeriesDataset, fit_and_apply_zscore
from axmae.embedding import patchify, positional_encoding
from axmae.engine import DivergenceError, Tensor
from axmae.mae import (
    MaeArch,
    PretrainConfig,
    apply_mask,
    attention_probe,
    encode,
    encode_representation,
    encode_representations,
    init_mae_params,
    load_mae_checkpoint,
    masked_loss,
    pad_and_decode,
    pretrain,
    sample_mask,
    save_mae_checkpoint,
)


def small_arch(**kw):
    base = dict(patch_len=4, channels=1, embed_dim=8, heads=2, encoder_layers=1, t_long=16)
    base.update(kw)
    return MaeArch(**base)


def embed_grid(patches, params, t_p, n):
    x = patches if isinstance(patches, Tensor) else Tensor(np.asarray(patches))
    pos = positional_encoding(t_p, n, params.arch.embed_dim)
    return eg.add(eg.add(eg.matmul(x, params["embed.w"]), params["embed.b"]), Tensor(pos))


# ---------------------------------------------------------------- masking


def test_fixed_mask_counts():
    assert sample_mask("spatial", 4, 0.25, seed=0).n_masked == 1
    spec = sample_mask("spatial", 307, 0.25, seed=1)
    assert spec.n_masked == 76
    assert len(spec.visible_indices) == 231
    assert sample_mask("temporal", 72, 0.25, seed=2).n_masked == 18


def test_mask_partition_is_sorted_and_complete():
    spec = sample_mask("temporal", 40, 0.3, seed=9)
    masked, visible = spec.masked_indices, spec.visible_indices
    assert list(masked) == sorted(masked)
    assert list(visible) == sorted(visible)
    assert not set(masked) & set(visible)
    assert sorted(set(masked) | set(visible)) == list(range(40))


def test_mask_determinism_and_seed_sensitivity():
    a = sample_mask("spatial", 100, 0.25, seed=(7, 3, 0))
    b = sample_mask("spatial", 100, 0.25, seed=(7, 3, 0))
    c = sample_mask("spatial", 100, 0.25, seed=(7, 3, 1))
    assert a.masked_indices == b.masked_indices
    assert a.masked_indices != c.masked_indices


def test_bernoulli_mask_varies_and_never_blinds():
    counts = [sample_mask("spatial", 40, 0.5, seed=s, mode="bernoulli").n_masked
              for s in range(50)]
    assert len(set(counts)) > 1
    assert 10 < np.mean(counts) < 30
    for s in range(30):
        spec = sample_mask("spatial", 3, 0.99, seed=s, mode="bernoulli")
        assert len(spec.visible_indices) >= 1


def test_mask_ratio_zero_keeps_everything():
    spec = sample_mask("spatial", 6, 0.0, seed=0)
    assert spec.n_masked == 0
    assert spec.visible_indices == tuple(range(6))


def test_mask_argument_validation():
    with pytest.raises(ValueError, match="axis"):
        sample_mask("diagonal", 4, 0.25, seed=0)
    with pytest.raises(ValueError, match="extent"):
        sample_mask("spatial", 0, 0.25, seed=0)
    with pytest.raises(ValueError, match="ratio"):
        sample_mask("spatial", 4, 1.0, seed=0)
    with pytest.raises(ValueError, match="mode"):
        sample_mask("spatial", 4, 0.25, seed=0, mode="stripes")


def test_apply_mask_spatial_selects_node_columns():
    e = Tensor(np.arange(2 * 3 * 5 * 4, dtype=float).reshape(2, 3, 5, 4))
    spec = sample_mask("spatial", 5, 0.4, seed=3)
    out = apply_mask(e, spec)
    assert out.shape == (2, 3, 3, 4)
    assert np.array_equal(out.values, e.values[:, :, list(spec.visible_indices), :])


def test_apply_mask_temporal_selects_patch_rows():
    e = Tensor(np.arange(6 * 4 * 4, dtype=float).reshape(6, 4, 4))
    spec = sample_mask("temporal", 6, 0.5, seed=5)
    out = apply_mask(e, spec)
    assert out.shape == (3, 4, 4)
    assert np.array_equal(out.values, e.values[list(spec.visible_indices)])


def test_apply_mask_mixed_flattens_patch_major():
    t_p, n, d = 3, 4, 2
    e = Tensor(np.arange(t_p * n * d, dtype=float).reshape(t_p, n, d))
    spec = sample_mask("mixed", t_p * n, 0.25, seed=1)
    out = apply_mask(e, spec)
    flat = e.values.reshape(t_p * n, d)
    assert np.array_equal(out.values, flat[list(spec.visible_indices)])
    # slot order is patch-major: slot s covers (patch s // n, node s % n)
    assert np.array_equal(flat[5], e.values[5 // n, 5 % n])


def test_apply_mask_extent_mismatch():
    e = Tensor(np.zeros((2, 3, 5, 4)))
    with pytest.raises(ValueError, match="extent"):
        apply_mask(e, sample_mask("spatial", 7, 0.25, seed=0))


# ---------------------------------------------------------------- encoder


def test_encode_preserves_shape_per_axis():
    arch = small_arch()
    params = init_mae_params(arch, seed=0)
    grid = Tensor(np.random.default_rng(0).normal(size=(2, 4, 5, 8)))
    assert encode(grid, params, "spatial").shape == (2, 4, 5, 8)
    assert encode(grid, params, "temporal").shape == (2, 4, 5, 8)
    slots = Tensor(np.random.default_rng(1).normal(size=(2, 20, 8)))
    assert encode(slots, params, "mixed").shape == (2, 20, 8)
    with pytest.raises(ValueError, match="axis"):
        encode(grid, params, "sideways")


def test_spatial_encoder_is_patch_permutation_equivariant():
    # spatial attention never mixes patch rows, so permuting them commutes
    params = init_mae_params(small_arch(), seed=1)
    rng = np.random.default_rng(2)
    x = rng.normal(size=(6, 5, 8))
    perm = rng.permutation(6)
    direct = encode(Tensor(x[perm]), params, "spatial").values
    permuted = encode(Tensor(x), params, "spatial").values[perm]
    assert np.array_equal(direct, permuted)


def test_temporal_encoder_is_node_permutation_equivariant():
    params = init_mae_params(small_arch(), seed=1)
    rng = np.random.default_rng(3)
    x = rng.normal(size=(6, 5, 8))
    perm = rng.permutation(5)
    direct = encode(Tensor(x[:, perm]), params, "temporal").values
    permuted = encode(Tensor(x), params, "temporal").values[:, perm]
    assert np.array_equal(direct, permuted)


def test_attention_scores_stay_on_one_axis():
    arch = small_arch()
    params = init_mae_params(arch, seed=0)
    t_p, n = 3, 6
    grid = Tensor(np.random.default_rng(4).normal(size=(2, t_p, n, 8)))
    with attention_probe() as shapes:
        encode(grid, params, "spatial")
    assert shapes and all(s[-2:] == (n, n) for s in shapes)
    with attention_probe() as shapes:
        encode(grid, params, "temporal")
    assert shapes and all(s[-2:] == (t_p, t_p) for s in shapes)
    # the joint slot count never appears as a score-matrix side
    assert all(t_p * n not in s[-2:] for s in shapes)


# ---------------------------------------------------------------- decoder


def test_temporal_decode_shapes_at_archive_scale():
    arch = MaeArch(patch_len=12, channels=1, embed_dim=16, heads=4,
                   encoder_layers=1, t_long=864)
    params = init_mae_params(arch, seed=0)
    spec = sample_mask("temporal", 72, 0.25, seed=0)
    h = Tensor(np.random.default_rng(0).normal(size=(54, 170, 16)))
    q_hat, full = pad_and_decode(h, spec, params, 72, 170, return_full=True)
    assert q_hat.shape == (18, 170, 12)
    assert full.shape == (72, 170, 12)


def test_spatial_decode_shapes():
    arch = small_arch()
    params = init_mae_params(arch, seed=0)
    spec = sample_mask("spatial", 5, 0.4, seed=1)
    h = Tensor(np.random.default_rng(1).normal(size=(2, 4, 3, 8)))
    q_hat = pad_and_decode(h, spec, params, 4, 5)
    assert q_hat.shape == (2, 4, 2, 4)


def test_mixed_decode_shapes():
    arch = small_arch()
    params = init_mae_params(arch, seed=0)
    spec = sample_mask("mixed", 12, 0.25, seed=2)
    h = Tensor(np.random.default_rng(2).normal(size=(9, 8)))
    q_hat = pad_and_decode(h, spec, params, 3, 4)
    assert q_hat.shape == (3, 4)


def test_decode_with_empty_mask_returns_empty_block():
    arch = small_arch()
    params = init_mae_params(arch, seed=0)
    spec = sample_mask("spatial", 5, 0.0, seed=0)
    h = Tensor(np.random.default_rng(3).normal(size=(4, 5, 8)))
    q_hat, full = pad_and_decode(h, spec, params, 4, 5, return_full=True)
    assert q_hat.shape == (4, 0, 4)
    assert full.shape == (4, 5, 4)


def test_decode_rejects_wrong_visible_block():
    arch = small_arch()
    params = init_mae_params(arch, seed=0)
    spec = sample_mask("spatial", 5, 0.4, seed=1)  # 3 visible
    h = Tensor(np.zeros((4, 4, 8)))
    with pytest.raises(ValueError, match="does not match mask"):
        pad_and_decode(h, spec, params, 4, 5)


def test_decoder_restores_original_position_order():
    # encode nothing: feed position-tagged hidden states straight through a
    # zero-weight readout is opaque, so instead check the reorder step via
    # the full regression output of an identity-friendly setup
    arch = small_arch()
    params = init_mae_params(arch, seed=0)
    spec = sample_mask("temporal", 4, 0.5, seed=7)
    h = Tensor(np.random.default_rng(5).normal(size=(2, 4, 8)))
    q_hat, full = pad_and_decode(h, spec, params, 4, 4, return_full=True)
    masked_rows = full.values[list(spec.masked_indices)]
    assert np.array_equal(q_hat.values, masked_rows)


# ---------------------------------------------------------------- loss


def test_masked_loss_hand_value():
    pred = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]))
    truth = np.array([[0.0, 2.0], [5.0, 4.0]])
    loss = masked_loss(pred, truth)
    assert loss.values == pytest.approx(0.75, abs=0)


def test_masked_loss_validation():
    with pytest.raises(ValueError, match="differ"):
        masked_loss(Tensor(np.zeros((2, 2))), np.zeros((2, 3)))
    with pytest.raises(ValueError, match="empty"):
        masked_loss(Tensor(np.zeros((0, 2))), np.zeros((0, 2)))


def test_visible_positions_receive_exactly_zero_gradient():
    arch = small_arch()
    params = init_mae_params(arch, seed=3)
    # zero-init regression would zero all grads; give it real weights
    rng = np.random.default_rng(6)
    params["reg.w"].values = rng.normal(size=params["reg.w"].shape)
    t_p, n = 4, 5
    patches = rng.normal(size=(2, t_p, n, arch.patch_width))
    for axis, extent in (("spatial", n), ("temporal", t_p)):
        spec = sample_mask(axis, extent, 0.4, seed=11)
        e = embed_grid(patches, params, t_p, n)
        h = encode(apply_mask(e, spec), params, axis)
        q_hat, full = pad_and_decode(h, spec, params, t_p, n, return_full=True)
        target = rng.normal(size=q_hat.shape)
        loss = masked_loss(q_hat, target)
        for p in params.parameters():
            p.grad = None
        loss.backward()
        grid_grad = full.grad
        ax = -3 if axis == "temporal" else -2
        vis = np.take(grid_grad, list(spec.visible_indices), axis=ax)
        msk = np.take(grid_grad, list(spec.masked_indices), axis=ax)
        assert np.all(vis == 0.0)
        assert np.any(msk != 0.0)


# ---------------------------------------------------------------- training


def zero_dataset(t=240, n=3):
    ds = SeriesDataset(np.zeros((t, n, 1)))
    ds.normalized = True
    return ds


def tiny_config(**kw):
    base = dict(t_long=48, patch_len=12, embed_dim=8, heads=2, encoder_layers=1,
                mask_ratio=0.25, epochs=2, batch_size=2, learning_rate=1e-3,
                window_stride=12, max_val_windows=2, seed=0)
    base.update(kw)
    return PretrainConfig(**base)


def random_dataset(t=240, n=4, seed=0):
    rng = np.random.default_rng(seed)
    raw = SeriesDataset(rng.normal(size=(t, n, 1)))
    return fit_and_apply_zscore(raw)


def test_pretrain_on_zero_series_sits_at_zero_loss():
    # the regression head starts at zero, so an all-zero series is already
    # perfectly reconstructed and the abs-loss subgradient keeps it there
    ckpt, curve = pretrain(zero_dataset(), "temporal", tiny_config())
    assert curve
    assert all(row[1] == 0.0 for row in curve)
    assert ckpt.metadata["best_val_loss"] == 0.0


def test_pretrain_is_deterministic():
    cfg = tiny_config()
    ds = random_dataset(seed=5)
    ckpt1, curve1 = pretrain(ds, "spatial", cfg)
    ckpt2, curve2 = pretrain(ds, "spatial", cfg)
    assert curve1 == curve2
    for name in ckpt1.params.tensors:
        assert np.array_equal(ckpt1.params[name].values, ckpt2.params[name].values)


def test_pretrain_seed_changes_the_run():
    ds = random_dataset(seed=5)
    _, curve_a = pretrain(ds, "spatial", tiny_config(seed=1, epochs=1))
    _, curve_b = pretrain(ds, "spatial", tiny_config(seed=2, epochs=1))
    assert [r[1] for r in curve_a] != [r[1] for r in curve_b]


def test_pretrain_loss_curve_layout():
    cfg = tiny_config()
    _, curve = pretrain(random_dataset(), "temporal", cfg)
    steps = [row[0] for row in curve]
    assert steps == list(range(1, len(curve) + 1))
    # validation loss appears exactly once per epoch, on the epoch's last step
    val_rows = [row for row in curve if row[2] is not None]
    assert len(val_rows) == cfg.epochs
    for row in val_rows:
        assert math.isfinite(row[2])


def test_pretrain_requires_normalized_data():
    ds = SeriesDataset(np.random.default_rng(0).normal(size=(240, 3, 1)))
    with pytest.raises(DataError, match="normalized"):
        pretrain(ds, "spatial", tiny_config())


def test_pretrain_rejects_mask_ratio_that_masks_nothing():
    ds = random_dataset(n=2)
    with pytest.raises(ValueError, match="masks nothing"):
        pretrain(ds, "spatial", tiny_config(mask_ratio=0.25))


def test_pretrain_rejects_short_training_split():
    ds = random_dataset(t=60)  # train split is 36 steps < t_long 48
    with pytest.raises(DataError, match="shorter than t_long"):
        pretrain(ds, "temporal", tiny_config())


@pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning")
def test_pretrain_divergence_raises():
    ds = random_dataset(seed=3)
    with pytest.raises(DivergenceError):
        pretrain(ds, "spatial", tiny_config(learning_rate=1e18, epochs=50))


def test_checkpoint_round_trip_preserves_forward(tmp_path):
    ds = random_dataset(seed=8)
    cfg = tiny_config(epochs=1)
    ckpt, _ = pretrain(ds, "temporal", cfg)
    window = ds.values[:48]
    before = encode_representation(window, ckpt)

    path = tmp_path / "t.ckpt"
    save_mae_checkpoint(path, ckpt)
    loaded = load_mae_checkpoint(path)
    assert loaded.axis == "temporal"
    assert loaded.n_nodes == ckpt.n_nodes
    assert loaded.arch == ckpt.arch
    assert loaded.norm == ckpt.norm
    assert loaded.metadata["seed"] == cfg.seed
    after = encode_representation(window, loaded)
    assert np.array_equal(before, after)


def test_checkpoint_kind_is_checked(tmp_path):
    from axmae.serialize import save_container
    path = tmp_path / "other.axc"
    save_container(path, {"kind": "something-else"}, [])
    with pytest.raises(ValueError, match="mae-checkpoint"):
        load_mae_checkpoint(path)


# ---------------------------------------------------------------- inference


def test_encode_representation_shape_and_determinism():
    ds = random_dataset(seed=2)
    ckpt, _ = pretrain(ds, "spatial", tiny_config(epochs=1))
    window = ds.values[10:58]
    h1 = encode_representation(window, ckpt)
    h2 = encode_representation(window, ckpt)
    assert h1.shape == (4, 4, 8)
    assert np.array_equal(h1, h2)


def test_encode_representations_batch_matches_single():
    ds = random_dataset(seed=2)
    ckpt, _ = pretrain(ds, "temporal", tiny_config(epochs=1))
    windows = np.stack([ds.values[0:48], ds.values[12:60]])
    batch = encode_representations(windows, ckpt)
    assert batch.shape == (2, 4, 4, 8)
    assert np.array_equal(batch[0], encode_representation(windows[0], ckpt))
    assert np.array_equal(batch[1], encode_representation(windows[1], ckpt))


def test_constant_content_encodes_identically_at_any_offset():
    # positions are window-relative, so two windows with identical content
    # produce identical representations wherever they were cut from
    values = np.full((200, 3, 1), 0.25)
    ds = SeriesDataset(values)
    ds.normalized = True
    ckpt, _ = pretrain(ds, "temporal", tiny_config(epochs=1))
    h_early = encode_representation(values[0:48], ckpt)
    h_late = encode_representation(values[100:148], ckpt)
    assert np.array_equal(h_early, h_late)


def test_encode_representation_validates_geometry():
    ds = random_dataset(seed=2)
    ckpt, _ = pretrain(ds, "spatial", tiny_config(epochs=1))
    with pytest.raises(ValueError, match="nodes"):
        encode_representation(np.zeros((48, 5, 1)), ckpt)
    with pytest.raises(ValueError, match="incompatible"):
        encode_representation(np.zeros((36, 3, 1)), ckpt)


def test_mixed_checkpoint_keeps_grid_shape():
    ds = random_dataset(seed=4)
    ckpt, _ = pretrain(ds, "mixed", tiny_config(epochs=1))
    h = encode_representation(ds.values[:48], ckpt)
    assert h.shape == (4, 4, 8)

"""GRU cell, multi-head attention and layer norm primitives."""

import numpy as np
import pytest

from kgdialog.nn import (
    GruParams,
    LayerNormParams,
    MhaParams,
    Rng,
    Tensor,
    check_gradients,
    gru_cell_step,
    layer_norm,
    multi_head_attention,
)


def zero_gru(input_dim, hidden_dim):
    p = GruParams.create(input_dim, hidden_dim, Rng(0))
    for name, t in p.named("g"):
        t.data = np.zeros_like(t.data)
    return p


class TestGruCell:
    def test_zero_weights_halve_state(self):
        p = zero_gru(3, 4)
        h = Tensor(np.array([1.0, -2.0, 4.0, 0.5], dtype=np.float32))
        x = Tensor(np.ones(3, dtype=np.float32))
        out = gru_cell_step(x, h, p)
        assert np.allclose(out.data, 0.5 * h.data)

    def test_shape_mismatch_rejected(self):
        p = GruParams.create(3, 4, Rng(1))
        with pytest.raises(ValueError):
            gru_cell_step(Tensor(np.ones(2)), Tensor(np.ones(4)), p)
        with pytest.raises(ValueError):
            gru_cell_step(Tensor(np.ones(3)), Tensor(np.ones(5)), p)

    def test_deterministic(self):
        p = GruParams.create(3, 4, Rng(2))
        x = Tensor(Rng(3).normal(3))
        h = Tensor(Rng(4).normal(4))
        a = gru_cell_step(x, h, p).data
        b = gru_cell_step(x, h, p).data
        assert np.array_equal(a, b)

    @pytest.mark.parametrize("seed", range(10))
    def test_gradient_matches_finite_differences(self, seed):
        rng = Rng(500 + seed)
        p = GruParams.create(3, 4, rng, dtype=np.float64)
        x = Tensor(rng.normal(3, dtype=np.float64), requires_grad=True)
        h = Tensor(rng.normal(4, dtype=np.float64), requires_grad=True)
        weights = rng.normal(4, dtype=np.float64)
        params = [x, h] + [t for _, t in p.named("g")]

        def loss():
            return (gru_cell_step(x, h, p) * Tensor(weights)).sum()

        check_gradients(loss, params, max_coords=4, rng=rng)

    def test_batched_matches_loop(self):
        rng = Rng(8)
        p = GruParams.create(3, 4, rng)
        xs = Tensor(rng.normal((5, 3)))
        hs = Tensor(rng.normal((5, 4)))
        batched = gru_cell_step(xs, hs, p).data
        for i in range(5):
            single = gru_cell_step(Tensor(xs.data[i]), Tensor(hs.data[i]), p).data
            assert np.allclose(batched[i], single, atol=1e-6)


class TestMultiHeadAttention:
    def test_single_key_returns_its_value_projection(self):
        rng = Rng(10)
        p = MhaParams.create(4, 2, rng)
        q = Tensor(rng.normal((3, 4)))
        kv = Tensor(rng.normal((1, 4)))
        out = multi_head_attention(q, kv, None, p)
        # with one key every attention row is [1], so all outputs equal
        # the projected single value row
        for i in range(1, 3):
            assert np.allclose(out.data[i], out.data[0], atol=1e-6)

    def test_one_hot_mask_selects_value_row(self):
        d = 4
        p = MhaParams.create(d, 1, Rng(0))
        for name, t in p.named("a"):
            if name.endswith(("w_q", "w_k", "w_v", "w_o")):
                t.data = np.eye(d, dtype=np.float32)
            else:
                t.data = np.zeros_like(t.data)
        kv = Tensor(Rng(1).normal((5, d)))
        q = Tensor(Rng(2).normal((2, d)))
        mask = np.zeros((2, 5), dtype=bool)
        mask[0, 3] = True
        mask[1, 1] = True
        out = multi_head_attention(q, kv, mask, p)
        assert np.allclose(out.data[0], kv.data[3], atol=1e-6)
        assert np.allclose(out.data[1], kv.data[1], atol=1e-6)

    def test_row_with_no_keys_rejected(self):
        p = MhaParams.create(4, 2, Rng(3))
        q = Tensor(Rng(4).normal((2, 4)))
        kv = Tensor(Rng(5).normal((3, 4)))
        mask = np.ones((2, 3), dtype=bool)
        mask[1] = False
        with pytest.raises(ValueError):
            multi_head_attention(q, kv, mask, p)

    def test_indivisible_heads_rejected(self):
        with pytest.raises(ValueError):
            MhaParams.create(6, 4, Rng(0))

    @pytest.mark.parametrize("seed", range(10))
    def test_gradient(self, seed):
        rng = Rng(700 + seed)
        p = MhaParams.create(4, 2, rng, dtype=np.float64)
        q = Tensor(rng.normal((3, 4), dtype=np.float64), requires_grad=True)
        kv = Tensor(rng.normal((4, 4), dtype=np.float64), requires_grad=True)
        mask = np.ones((3, 4), dtype=bool)
        mask[0, 1] = False
        weights = rng.normal((3, 4), dtype=np.float64)
        params = [q, kv] + [t for _, t in p.named("a")]

        def loss():
            return (multi_head_attention(q, kv, mask, p) * Tensor(weights)).sum()

        check_gradients(loss, params, max_coords=3, rng=rng)


class TestLayerNorm:
    def test_normalizes_rows(self):
        p = LayerNormParams.create(8)
        x = Tensor(Rng(6).normal((3, 8)) * 4.0 + 2.0)
        out = layer_norm(x, p).data
        assert np.allclose(out.mean(axis=-1), 0.0, atol=1e-5)
        assert np.allclose(out.std(axis=-1), 1.0, atol=1e-2)

    def test_gradient(self):
        rng = Rng(77)
        p = LayerNormParams.create(5, dtype=np.float64)
        p.gain.data = rng.normal(5, dtype=np.float64) + 1.0
        x = Tensor(rng.normal((2, 5), dtype=np.float64), requires_grad=True)
        weights = rng.normal((2, 5), dtype=np.float64)

        def loss():
            return (layer_norm(x, p) * Tensor(weights)).sum()

        check_gradients(loss, [x, p.gain, p.bias], max_coords=5, rng=rng)

"""Prior/posterior knowledge distributions, history recurrence and selection."""

import numpy as np
import pytest

from kgdialog.model import (
    HistoryState,
    ModelConfig,
    SelectorParams,
    history_step,
    posterior_distribution,
    prior_distribution,
    select_knowledge,
)
from kgdialog.model.selector import KnowledgeDistribution
from kgdialog.nn import Rng, Tensor, check_gradients, softmax_masked


def cfg_of(d=8, **kw):
    return ModelConfig(d_model=d, heads=2, **kw)


def make_selector(d=8, seed=0, dtype=np.float32):
    return SelectorParams.create(cfg_of(d), Rng(seed), dtype)


def rand_vec(rng, d, dtype=np.float32, grad=False):
    return Tensor(rng.normal(d, dtype=dtype), requires_grad=grad)


class TestDistributions:
    def test_single_candidate_is_certain(self):
        cfg = cfg_of()
        p = make_selector()
        rng = Rng(1)
        pool = Tensor(rng.normal((1, 8)))
        pi = prior_distribution(rand_vec(rng, 8), rand_vec(rng, 8), rand_vec(rng, 8),
                                pool, None, p, cfg)
        assert np.allclose(pi.probs.data, [1.0])
        q = posterior_distribution(rand_vec(rng, 8), rand_vec(rng, 8), pool, None, p, cfg)
        assert np.allclose(q.probs.data, [1.0])

    def test_masked_entries_zero(self):
        cfg = cfg_of()
        p = make_selector(seed=2)
        rng = Rng(3)
        pool = Tensor(rng.normal((5, 8)))
        mask = np.array([True, True, False, True, False])
        pi = prior_distribution(rand_vec(rng, 8), rand_vec(rng, 8), rand_vec(rng, 8),
                                pool, mask, p, cfg)
        assert np.all(pi.probs.data[~mask] == 0.0)
        assert abs(pi.probs.data.sum() - 1.0) <= 1e-6

    def test_all_masked_rejected(self):
        cfg = cfg_of()
        p = make_selector(seed=4)
        rng = Rng(5)
        pool = Tensor(rng.normal((3, 8)))
        with pytest.raises(ValueError):
            prior_distribution(rand_vec(rng, 8), rand_vec(rng, 8), rand_vec(rng, 8),
                               pool, np.zeros(3, bool), p, cfg)

    def test_identical_queries_identical_distributions(self):
        cfg = cfg_of()
        p = make_selector(seed=6)
        rng = Rng(7)
        pool = Tensor(rng.normal((4, 8)))
        d_xy, d_k = rand_vec(rng, 8), rand_vec(rng, 8)
        a = posterior_distribution(d_xy, d_k, pool, None, p, cfg)
        b = posterior_distribution(d_xy, d_k, pool, None, p, cfg)
        assert np.array_equal(a.probs.data, b.probs.data)

    def test_normalized_under_fuzz(self):
        cfg = cfg_of()
        p = make_selector(seed=8)
        rng = Rng(9)
        for trial in range(30):
            L = 2 + rng.randint(6)
            pool = Tensor(rng.uniform((L, 8), -5, 5))
            q = posterior_distribution(rand_vec(rng, 8), rand_vec(rng, 8), pool, None, p, cfg)
            assert abs(q.probs.data.sum() - 1.0) <= 1e-6
            assert np.isfinite(q.probs.data).all()

    def test_prior_never_sees_current_response(self):
        # perturbing y^t changes q^t but never pi^t
        from kgdialog.model import EncoderParams, dialog_step, DialogState
        cfg = cfg_of()
        sel = make_selector(seed=10)
        enc = EncoderParams.create(cfg, 12, Rng(11))
        rng = Rng(12)
        for trial in range(100):
            pool = Tensor(rng.normal((4, 8)))
            d_prev = DialogState(d_xy=Tensor(rng.normal(8)), turn=0)
            h_x = rand_vec(rng, 8)
            d_k = rand_vec(rng, 8)
            y_a = rand_vec(rng, 8)
            y_b = rand_vec(rng, 8)
            pi_a = prior_distribution(d_prev.d_xy, h_x, d_k, pool, None, sel, cfg)
            pi_b = prior_distribution(d_prev.d_xy, h_x, d_k, pool, None, sel, cfg)
            assert np.array_equal(pi_a.probs.data, pi_b.probs.data)
            q_a = posterior_distribution(dialog_step(d_prev, h_x, y_a, enc).d_xy, d_k, pool, None, sel, cfg)
            q_b = posterior_distribution(dialog_step(d_prev, h_x, y_b, enc).d_xy, d_k, pool, None, sel, cfg)
            assert not np.array_equal(q_a.probs.data, q_b.probs.data)

    def test_gradient_through_query_history_and_softmax(self):
        cfg = cfg_of(d=4)
        p = make_selector(d=4, seed=13, dtype=np.float64)
        rng = Rng(14)
        pool = Tensor(rng.normal((3, 4), dtype=np.float64), requires_grad=True)
        d_xy = rand_vec(rng, 4, np.float64, grad=True)
        h_x = rand_vec(rng, 4, np.float64, grad=True)
        sel_emb = rand_vec(rng, 4, np.float64, grad=True)
        weights = rng.normal(3, dtype=np.float64)
        params = [pool, d_xy, h_x, sel_emb, p.w_prior] + [t for _, t in p.gru_hist.named("g")]

        def loss():
            hist = history_step(HistoryState.initial(4, np.float64), sel_emb, p)
            pi = prior_distribution(d_xy, h_x, hist.d_k, pool, None, p, cfg)
            return (pi.probs * Tensor(weights)).sum()

        check_gradients(loss, params, max_coords=4, rng=rng)


class TestHistory:
    def test_initial_state_zero(self):
        st = HistoryState.initial(8)
        assert np.all(st.d_k.data == 0)
        assert st.turn == 0

    def test_zero_weight_gru_halves_d_k(self):
        p = make_selector(seed=15)
        for _, t in p.gru_hist.named("g"):
            t.data = np.zeros_like(t.data)
        st = HistoryState(d_k=Tensor(Rng(16).normal(8)), last_selected=Tensor(np.zeros(8, np.float32)), turn=1)
        emb = Tensor(Rng(17).normal(8))
        new = history_step(st, emb, p)
        assert np.allclose(new.d_k.data, 0.5 * st.d_k.data)
        assert new.turn == 2
        assert new.last_selected is emb

    def test_selection_order_changes_final_state(self):
        p = make_selector(seed=18)
        rng = Rng(19)
        embs = [Tensor(rng.normal(8)) for _ in range(3)]

        def run(order):
            st = HistoryState.initial(8)
            for i in order:
                st = history_step(st, embs[i], p)
            return st.d_k.data

        assert not np.allclose(run([0, 1, 2]), run([1, 0, 2]), atol=1e-5)


class TestSelect:
    def _dist(self, probs):
        probs = np.asarray(probs, dtype=np.float32)
        return KnowledgeDistribution(
            probs=Tensor(probs),
            logits=Tensor(np.log(np.maximum(probs, 1e-30))),
            mask=probs > 0,
            kind="prior",
        )

    def test_argmax(self):
        pool = Tensor(Rng(20).normal((3, 8)))
        res = select_knowledge(self._dist([0.2, 0.5, 0.3]), pool, mode="argmax")
        assert res.index == 1
        assert np.array_equal(res.embedding.data, pool.data[1])

    def test_tie_breaks_to_lowest_index(self):
        pool = Tensor(Rng(21).normal((2, 8)))
        res = select_knowledge(self._dist([0.5, 0.5]), pool, mode="argmax")
        assert res.index == 0

    def test_gumbel_frequencies_match_distribution(self):
        target = np.array([0.5, 0.2, 0.25, 0.05], dtype=np.float64)
        dist = self._dist(target)
        pool = Tensor(Rng(22).normal((4, 8)))
        rng = Rng(23)
        counts = np.zeros(4)
        n = 100_000
        noise = rng.gumbel((n, 4))
        logits = dist.logits.data
        for i in range(n):
            counts[int(np.argmax(logits + noise[i]))] += 1
        freq = counts / n
        assert np.max(np.abs(freq - target)) < 0.01
        res = select_knowledge(dist, pool, mode="gumbel", tau=0.5, noise=noise[0])
        assert res.index == int(np.argmax(logits + noise[0]))
        # straight-through: forward embedding equals the hard pool row
        assert np.allclose(res.embedding.data, pool.data[res.index], atol=1e-6)

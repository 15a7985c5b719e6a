import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jumpclust.core import Centers, seeded_rng
from jumpclust.scoring import (
    ScoreAccumulator,
    ScoreContext,
    instantaneous_loss,
    score,
    score_batch,
)


def brute_force_loss(points, x):
    return min(sum((p - xi) ** 2 for p, xi in zip(row, x)) for row in points)


class TestInstantaneousLoss:
    def test_single_center(self):
        assert instantaneous_loss(Centers([[0.0, 0.0]]), [3.0, 4.0]) == 25.0

    def test_exact_hit_is_zero(self):
        c = Centers([[1.0, 0.0], [0.0, 1.0]])
        assert instantaneous_loss(c, [0.0, 1.0]) == 0.0

    def test_d1_three_centers_matches_brute_force(self):
        c = Centers([[-1.0], [2.0], [5.0]])
        x = [1.0]
        assert instantaneous_loss(c, x) == brute_force_loss(c.points.tolist(), x) == 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            instantaneous_loss(Centers([[0.0, 0.0]]), [1.0])

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_permutation_invariance(self, seed):
        rng = seeded_rng(seed, 0)
        pts = rng.standard_normal((4, 3))
        x = rng.standard_normal(3)
        base = instantaneous_loss(Centers(pts), x)
        perm = rng.permutation(4)
        assert instantaneous_loss(Centers(pts[perm]), x) == base

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_extra_center_never_hurts(self, seed):
        rng = seeded_rng(seed, 1)
        pts = rng.standard_normal((3, 2))
        extra = np.vstack([pts, rng.standard_normal((1, 2))])
        x = rng.standard_normal(2)
        assert instantaneous_loss(Centers(extra), x) <= instantaneous_loss(Centers(pts), x)


def random_context(rng, t, dim):
    return ScoreContext(
        observations=rng.standard_normal((t, dim)),
        ref_losses=rng.random(t) * 3.0,
        lam_prev=rng.random(t) * 2.0,
    )


class TestScore:
    def test_empty_context_is_zero(self):
        ctx = ScoreContext.empty(3)
        assert score(Centers([[0.0, 0.0, 0.0]]), ctx) == 0.0

    def test_hand_worked_single_step(self):
        # one observation at 1, reference prediction sits exactly on it,
        # unit variance weight: S_1(c=0) = 1 + 0.5 * (1 - 0)^2 = 1.5
        ctx = ScoreContext(np.array([[1.0]]), np.array([0.0]), np.array([1.0]))
        assert score(Centers([[0.0]]), ctx) == pytest.approx(1.5, rel=0, abs=0)

    def test_variance_terms_vanish_when_losses_match(self):
        rng = seeded_rng(11, 0)
        pts = rng.standard_normal((2, 2))
        xs = rng.standard_normal((6, 2))
        c = Centers(pts)
        losses = np.array([instantaneous_loss(c, x) for x in xs])
        ctx = ScoreContext(xs, losses, np.ones(6))
        assert score(c, ctx) == pytest.approx(losses.sum(), rel=1e-12)

    def test_score_dominates_plain_loss(self):
        rng = seeded_rng(12, 0)
        ctx = random_context(rng, 10, 2)
        c = Centers(rng.standard_normal((3, 2)))
        plain = sum(instantaneous_loss(c, x) for x in ctx.observations)
        assert score(c, ctx) >= plain

    def test_dimension_mismatch(self):
        ctx = random_context(seeded_rng(1, 0), 4, 3)
        with pytest.raises(ValueError):
            score(Centers([[0.0, 0.0]]), ctx)

    def test_batch_matches_scalar(self):
        rng = seeded_rng(13, 0)
        ctx = random_context(rng, 8, 2)
        stack = rng.standard_normal((40, 3, 2))
        batch = score_batch(stack, ctx)
        for i in range(0, 40, 7):
            assert batch[i] == pytest.approx(score(Centers(stack[i]), ctx), rel=1e-12)


class TestScoreAccumulator:
    def test_streaming_equals_batch_on_random_histories(self):
        # 100 random 20-step histories, relative agreement at 1e-10
        for trial in range(100):
            rng = seeded_rng(1000 + trial, 0)
            dim = 1 + trial % 3
            c = Centers(rng.standard_normal((1 + trial % 4, dim)))
            acc = ScoreAccumulator(c)
            obs, refs, lams = [], [], []
            for _ in range(20):
                x = rng.standard_normal(dim)
                ref = rng.random() * 4.0
                lam = rng.random() * 2.0
                obs.append(x)
                refs.append(ref)
                lams.append(lam)
                streaming = acc.update(x, ref, lam)
            batch = score(c, ScoreContext(np.array(obs), np.array(refs), np.array(lams)))
            assert streaming == pytest.approx(batch, rel=1e-10)

    def test_base_case_single_step(self):
        c = Centers([[0.0]])
        acc = ScoreAccumulator(c)
        got = acc.update(np.array([1.0]), 0.0, 1.0)
        assert got == pytest.approx(1.5)

    def test_zero_weight_adds_plain_loss(self):
        rng = seeded_rng(5, 0)
        c = Centers(rng.standard_normal((2, 2)))
        ctx = random_context(rng, 5, 2)
        acc = ScoreAccumulator(c, ctx)
        before = acc.value
        x = rng.standard_normal(2)
        after = acc.update(x, 123.0, 0.0)
        assert after - before == pytest.approx(instantaneous_loss(c, x), rel=1e-12)

    def test_prefix_cache_continuation(self):
        rng = seeded_rng(6, 0)
        c = Centers(rng.standard_normal((3, 2)))
        ctx = random_context(rng, 7, 2)
        acc = ScoreAccumulator(c, ctx)
        x, ref, lam = rng.standard_normal(2), 0.7, 0.3
        streaming = acc.update(x, ref, lam)
        full = ScoreContext(
            np.vstack([ctx.observations, x[None, :]]),
            np.append(ctx.ref_losses, ref),
            np.append(ctx.lam_prev, lam),
        )
        assert streaming == pytest.approx(score(c, full), rel=1e-10)

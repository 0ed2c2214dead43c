# -*- coding: utf-8 -*-
"""
Residual-layer context, replace-and-remask corruption, training and progressive decode
"""
import numpy as np
import pytest

from momask.errors import DataError, ModelError
from momask.models import NULL_CONDITION, CodebookStack, ConditionRef, DecodeConfig, DecodeTrace, RRemaskConfig, TokenGrid
from momask.services.masked_gen import iterative_decode
from momask.services.predictor import oracle_predictor, softmax
from momask.services.rvq import rvq_decode
from momask.services.residual_gen import (
    progressive_decode, residual_context, rremask_corrupt, train_residual, train_residual_layer,
)

WALK = ConditionRef.of("walk")


def three_layer_stack() -> CodebookStack:
    return CodebookStack.from_entries([np.array([0.0, 4.0]), np.array([-1.0, 0.0, 1.0]), np.array([0.0, 0.5])])


def random_stack(rng, layers: int, size: int = 4, dim: int = 2) -> CodebookStack:
    entries = [rng.normal(size=(size, dim))]
    for _ in range(layers - 1):
        book = rng.normal(scale=0.3, size=(size, dim))
        book[0] = 0.0
        entries.append(book)
    return CodebookStack.from_entries(entries)


def random_corpus(rng, stack: CodebookStack, count: int = 20, n: int = 10):
    corpus = []
    for i in range(count):
        grid = np.stack([rng.integers(0, cb.size, size=n) for cb in stack.layers])
        corpus.append((TokenGrid(grid), ConditionRef.of("walk" if i % 2 else "wave")))
    return corpus


class TestResidualContext:

    def test_first_layer_is_base_code(self, stack_1d):
        ctx = residual_context(stack_1d, np.array([[1, 0, 1]]), 1)
        np.testing.assert_array_equal(ctx.vectors[:, 0], [4.0, 0.0, 4.0])
        np.testing.assert_array_equal(ctx.ids, [1, 0, 1])
        assert ctx.layer == 1

    def test_partial_sum(self):
        ctx = residual_context(three_layer_stack(), np.array([[1], [0]]), 2)
        assert ctx.vectors[0, 0] == 3.0
        assert ctx.ids[0] == 1

    def test_zero_residual_codes_keep_base(self):
        stack = CodebookStack.from_entries([np.array([0.0, 4.0]), np.array([0.0, 1.0]), np.array([0.0, 2.0])])
        rows = np.array([[1, 0], [0, 0], [0, 0]])
        for j in (1, 2):
            np.testing.assert_array_equal(residual_context(stack, rows, j).vectors[:, 0], [4.0, 0.0])

    def test_missing_rows(self):
        with pytest.raises(DataError):
            residual_context(three_layer_stack(), np.array([[1]]), 2)

    def test_out_of_range_token(self):
        with pytest.raises(DataError, match="out of range"):
            residual_context(three_layer_stack(), np.array([[7], [0]]), 2)

    def test_layer_out_of_range(self, stack_1d):
        with pytest.raises(ValueError):
            residual_context(stack_1d, np.array([[1], [0]]), 2)


class TestRRemask:

    def test_zero_ratio_is_identity(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            row = rng.integers(0, 6, size=int(rng.integers(1, 20)))
            out, replaced = rremask_corrupt(row, 0.0, 6, rng)
            np.testing.assert_array_equal(out, row)
            assert len(replaced) == 0

    def test_binary_vocab_flips_everything(self):
        row = np.array([0, 1, 1, 0, 1])
        out, replaced = rremask_corrupt(row, 1.0, 2, np.random.default_rng(1))
        np.testing.assert_array_equal(out, 1 - row)
        np.testing.assert_array_equal(replaced, np.arange(5))

    def test_half_of_eight(self):
        row = np.array([3, 1, 4, 1, 5, 2, 6, 5])
        out, replaced = rremask_corrupt(row, 0.5, 8, np.random.default_rng(2))
        assert len(replaced) == 4
        assert np.all(out[replaced] != row[replaced])
        untouched = np.setdiff1d(np.arange(8), replaced)
        np.testing.assert_array_equal(out[untouched], row[untouched])
        assert np.all((out >= 0) & (out < 8))

    def test_invalid_ratio(self):
        with pytest.raises(ValueError):
            rremask_corrupt(np.array([0, 1]), -0.1, 2, np.random.default_rng(0))


class TestTrainResidual:

    def test_single_pair_marginal(self, stack_1d):
        grid = TokenGrid([[0], [2]])
        model = train_residual_layer(stack_1d, [(grid, WALK)], 1, RRemaskConfig(replace_ratio=0.0), 1.0, 0.0, seed=0)
        probs = softmax(model.predict_logits(np.array([1]), WALK, 1))
        assert probs[0, 2] == pytest.approx((1 + 1.0) / (1 + 1.0 * 3))

    def test_zero_ratio_is_plain_counting(self, stack_1d):
        grid = TokenGrid([[1, 0, 1], [0, 2, 1]])
        model = train_residual_layer(stack_1d, [(grid, WALK)], 1, RRemaskConfig(replace_ratio=0.0), 1.0, 0.0, seed=0)
        assert model.tables[(1, 0, "walk", 1)][0] == 1.0
        assert model.tables[(0, 2, "walk", 1)][2] == 1.0
        assert model.tables[(1, 5, "walk", 1)][1] == 1.0

    def test_corruption_is_observable(self):
        stack = CodebookStack.from_entries([np.array([0.0, 4.0, 8.0]), np.array([0.0, -1.0, 1.0])])
        corpus = random_corpus(np.random.default_rng(3), stack)
        clean = train_residual_layer(stack, corpus, 1, RRemaskConfig(replace_ratio=0.0), 1.0, 0.0, seed=4)
        noisy = train_residual_layer(stack, corpus, 1, RRemaskConfig(replace_ratio=0.3), 1.0, 0.0, seed=4)
        assert clean.table_snapshot() != noisy.table_snapshot()

    def test_deterministic_per_seed(self):
        rng = np.random.default_rng(5)
        stack = random_stack(rng, 3)
        corpus = random_corpus(rng, stack)
        a = train_residual(stack, corpus, RRemaskConfig(replace_ratio=0.2), 1.0, 0.1, seed=6)
        b = train_residual(stack, corpus, RRemaskConfig(replace_ratio=0.2), 1.0, 0.1, seed=6)
        assert sorted(a) == [1, 2]
        for j in a:
            assert a[j].table_snapshot() == b[j].table_snapshot()

    def test_base_layer_rejected(self, stack_1d):
        with pytest.raises(ValueError, match="base layer"):
            train_residual_layer(stack_1d, [(TokenGrid([[0], [0]]), WALK)], 0, RRemaskConfig(), 1.0, 0.0, seed=0)

    def test_empty_corpus(self, stack_1d):
        with pytest.raises(DataError):
            train_residual_layer(stack_1d, [], 1, RRemaskConfig(), 1.0, 0.0, seed=0)


class TestProgressiveDecode:

    def test_no_residual_layers(self):
        stack = CodebookStack.from_entries([np.array([0.0, 4.0])])
        grid, passes = progressive_decode({}, stack, np.array([1, 0, 1]), NULL_CONDITION, 0.0)
        np.testing.assert_array_equal(grid.indices, [[1, 0, 1]])
        assert passes == 0

    def test_hand_traced_reconstruction(self):
        stack = three_layer_stack()
        models = {
            1: oracle_predictor({(None, 1): [[1.0, 0.0, 0.0]]}),
            2: oracle_predictor({(None, 2): [[1.0, 0.0]]}),
        }
        grid, passes = progressive_decode(models, stack, np.array([1]), NULL_CONDITION, 0.0)
        np.testing.assert_array_equal(grid.indices, [[1], [0], [0]])
        assert passes == 2
        assert rvq_decode(stack, grid).codes[0, 0] == 3.0

    def test_reproducible(self):
        rng = np.random.default_rng(7)
        stack = random_stack(rng, 4)
        models = train_residual(stack, random_corpus(rng, stack), RRemaskConfig(), 1.0, 0.2, seed=1)
        base = rng.integers(0, 4, size=10)
        a, _ = progressive_decode(models, stack, base, WALK, 5.0)
        b, _ = progressive_decode(models, stack, base, WALK, 5.0)
        np.testing.assert_array_equal(a.indices, b.indices)

    def test_layer_causality(self):
        rng = np.random.default_rng(8)
        stack = random_stack(rng, 4)
        models = train_residual(stack, random_corpus(rng, stack), RRemaskConfig(), 1.0, 0.2, seed=2)
        base = rng.integers(0, 4, size=10)
        full, _ = progressive_decode(models, stack, base, WALK, 5.0)
        prefix, passes = progressive_decode(models, stack, base, WALK, 5.0, num_layers=2)
        np.testing.assert_array_equal(prefix.indices, full.indices[:2])
        assert passes == 1

    def test_sampling_flag_is_seeded(self):
        rng = np.random.default_rng(9)
        stack = random_stack(rng, 3)
        models = train_residual(stack, random_corpus(rng, stack), RRemaskConfig(), 1.0, 0.2, seed=3)
        base = rng.integers(0, 4, size=10)
        a, _ = progressive_decode(models, stack, base, WALK, 5.0, rng=np.random.default_rng(4), sample=True)
        b, _ = progressive_decode(models, stack, base, WALK, 5.0, rng=np.random.default_rng(4), sample=True)
        np.testing.assert_array_equal(a.indices, b.indices)

    def test_missing_model(self, stack_1d):
        with pytest.raises(ModelError, match="layer 1"):
            progressive_decode({}, stack_1d, np.array([0]), NULL_CONDITION, 0.0)

    def test_uncommitted_base(self, stack_1d):
        with pytest.raises(DataError):
            progressive_decode({}, stack_1d, np.array([0, -1]), NULL_CONDITION, 0.0)


class TestPassCount:

    def test_default_is_fifteen_passes(self):
        rng = np.random.default_rng(10)
        stack = random_stack(rng, 6)
        n = 12
        base_oracle = oracle_predictor({"walk": rng.dirichlet(np.ones(4), size=n), None: rng.dirichlet(np.ones(4), size=n)})
        residual = {j: oracle_predictor({(key, j): rng.dirichlet(np.ones(4), size=n) for key in ("walk", None)})
                    for j in range(1, 6)}
        trace = DecodeTrace()
        base = iterative_decode(base_oracle, n, WALK, DecodeConfig(), trace=trace)
        grid, passes = progressive_decode(residual, stack, base, WALK, 5.0)
        assert trace.passes == 10
        assert passes == 5
        assert trace.passes + passes == 15
        assert grid.num_layers == 6

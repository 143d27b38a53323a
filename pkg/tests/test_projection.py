import numpy as np
import pytest
from helpers import finite_difference_grads, random_gradcheck_case, relative_error

from typeseek.corpus import Corpus, Document, EntitySpan
from typeseek.errors import (
    CorruptCheckpointError,
    DimMismatchError,
    InvalidParamsError,
    NonFiniteLossError,
    TypeSplitViolationError,
    TypeWithoutMentionsError,
    ZeroVectorError,
)
from typeseek.lexical import Bm25Index
from typeseek.projection import (
    ProjectionModel,
    TrainConfig,
    Triplet,
    backward,
    build_triplets,
    forward,
    load_model,
    mine_hard_negatives,
    sample_dropout_masks,
    save_model,
    silu,
    train,
    triplet_loss,
)
from typeseek.represent import RepresentationKey, RepresentationStore

KEY = RepresentationKey(17, "attn.v")


def straight_line_forward(model, x):
    """Oracle: scalar-loop reimplementation of the inference forward pass."""
    hidden = []
    for i in range(model.hidden_dim):
        z = model.b1[i]
        for j in range(model.in_dim):
            z += model.w1[i, j] * x[j]
        s = 1.0 / (1.0 + np.exp(-z))
        hidden.append(z * s)
    out = []
    for i in range(model.out_dim):
        y = model.b2[i]
        for j in range(model.hidden_dim):
            y += model.w2[i, j] * hidden[j]
        out.append(y)
    return np.array(out)


class TestSilu:
    def test_zero(self):
        assert silu(0.0) == 0.0

    def test_large_positive_approaches_identity(self):
        assert silu(40.0) == pytest.approx(40.0, abs=1e-9)

    def test_one(self):
        assert silu(1.0) == pytest.approx(0.7310585786300049, abs=1e-12)

    def test_large_negative_underflows_to_zero(self):
        assert silu(-60.0) == pytest.approx(0.0, abs=1e-20)

    def test_vectorized(self):
        x = np.array([-2.0, 0.0, 3.0])
        expected = x / (1.0 + np.exp(-x))
        assert np.allclose(silu(x), expected)


class TestForward:
    def test_zero_weights_zero_output(self):
        model = ProjectionModel(
            w1=np.zeros((4, 6)), b1=np.zeros(4), w2=np.zeros((3, 4)), b2=np.zeros(3),
            dropout_rate=0.0,
        )
        assert np.array_equal(forward(model, np.ones(6)), np.zeros(3))

    def test_zero_w2_kills_any_input(self):
        rng = np.random.default_rng(0)
        model = ProjectionModel(
            w1=np.eye(5), b1=np.zeros(5), w2=np.zeros((2, 5)), b2=np.zeros(2),
            dropout_rate=0.0,
        )
        for _ in range(3):
            assert np.array_equal(forward(model, rng.standard_normal(5)), np.zeros(2))

    def test_matches_straight_line_oracle(self):
        rng = np.random.default_rng(11)
        model = ProjectionModel.initialize(7, 5, 4, dropout_rate=0.0, seed=3)
        for _ in range(5):
            x = rng.standard_normal(7)
            assert np.allclose(forward(model, x), straight_line_forward(model, x),
                               atol=1e-6)

    def test_output_dim_default_architecture(self):
        model = ProjectionModel.initialize(seed=0)
        assert model.in_dim == 1024 and model.hidden_dim == 500 and model.out_dim == 500
        out = forward(model, np.zeros(1024))
        assert out.shape == (500,)

    def test_dim_mismatch(self):
        model = ProjectionModel.initialize(8, 4, 3, seed=0)
        with pytest.raises(DimMismatchError):
            forward(model, np.zeros(9))

    def test_inference_is_pure(self):
        model = ProjectionModel.initialize(8, 4, 3, dropout_rate=0.5, seed=0)
        x = np.arange(8, dtype=float)
        a = forward(model, x, training=False)
        b = forward(model, x, training=False)
        assert np.array_equal(a, b)

    def test_training_dropout_needs_rng_and_perturbs(self):
        model = ProjectionModel.initialize(8, 64, 3, dropout_rate=0.5, seed=0)
        x = np.arange(8, dtype=float)
        with pytest.raises(InvalidParamsError):
            forward(model, x, training=True)
        rng = np.random.default_rng(1)
        dropped = forward(model, x, training=True, rng=rng)
        assert not np.array_equal(dropped, forward(model, x))

    def test_batch_matches_single(self):
        model = ProjectionModel.initialize(6, 5, 4, dropout_rate=0.0, seed=2)
        xs = np.random.default_rng(3).standard_normal((4, 6))
        batch = forward(model, xs)
        for i in range(4):
            assert np.allclose(batch[i], forward(model, xs[i]))


class TestTripletLoss:
    def unit(self, *xs):
        v = np.array(xs, dtype=float)
        return v / np.linalg.norm(v)

    def vectors_with_distances(self, d_ap, d_an):
        # place p and n at chosen cosine distances from anchor a=[1,0]
        a = np.array([1.0, 0.0])
        p = np.array([1.0 - d_ap, np.sqrt(1 - (1 - d_ap) ** 2)])
        n = np.array([1.0 - d_an, np.sqrt(1 - (1 - d_an) ** 2)])
        return a, p, n

    def test_inactive_hinge(self):
        a, p, n = self.vectors_with_distances(0.1, 0.5)
        assert triplet_loss(a, p, n, margin=0.2) == 0.0

    def test_equal_positive_negative_gives_margin(self):
        a = self.unit(1.0, 0.2)
        p = self.unit(0.3, 1.0)
        assert triplet_loss(a, p, p, margin=0.2) == pytest.approx(0.2, abs=1e-12)

    def test_direct_formula(self):
        a, p, n = self.vectors_with_distances(0.4, 0.3)
        assert triplet_loss(a, p, n, margin=0.2) == pytest.approx(0.3, abs=1e-12)

    def test_scale_invariance(self):
        a, p, n = self.vectors_with_distances(0.4, 0.1)
        assert triplet_loss(a, p, n) == pytest.approx(
            triplet_loss(5 * a, 0.1 * p, 42 * n), abs=1e-12
        )

    def test_zero_vector(self):
        with pytest.raises(ZeroVectorError):
            triplet_loss(np.zeros(3), np.ones(3), np.ones(3))

    def test_nonnegative_and_zero_iff_separated(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            a, p, n = (rng.standard_normal(4) for _ in range(3))
            margin = float(rng.uniform(0.05, 0.5))
            loss = triplet_loss(a, p, n, margin)
            assert loss >= 0.0
            ah, ph, nh = (v / np.linalg.norm(v) for v in (a, p, n))
            d_ap, d_an = 1 - ah @ ph, 1 - ah @ nh
            assert (loss == 0.0) == (d_an >= d_ap + margin)


class TestBackward:
    config = TrainConfig(margin=0.3, seed=0)

    def test_inactive_batch_zero_gradients(self):
        model = ProjectionModel.initialize(6, 4, 3, dropout_rate=0.0, seed=1)
        # p == a makes d(a,p)=0; pick n far away so hinge is dead
        rng = np.random.default_rng(2)
        triplets = []
        while len(triplets) < 4:
            a = rng.standard_normal(6)
            n = rng.standard_normal(6)
            if triplet_loss(forward(model, a), forward(model, a), forward(model, n),
                            self.config.margin) == 0.0:
                triplets.append(Triplet(anchor=a, positive=a.copy(), negative=n))
        loss, grads = backward(model, triplets, self.config)
        assert loss == 0.0
        for g in grads.arrays():
            assert np.array_equal(g, np.zeros_like(g))

    @pytest.mark.parametrize("seed", range(4))
    def test_gradients_match_finite_differences(self, seed):
        model, triplets, margin = random_gradcheck_case(seed)
        config = TrainConfig(margin=margin, seed=0)
        _, analytic = backward(model, triplets, config)
        numeric = finite_difference_grads(model, triplets, margin)
        assert relative_error(analytic.arrays(), numeric) < 1e-4

    def test_gradcheck_with_fixed_dropout_mask(self):
        model, triplets, margin = random_gradcheck_case(17)
        model.dropout_rate = 0.4
        masks = sample_dropout_masks(model, len(triplets), np.random.default_rng(5))
        config = TrainConfig(margin=margin, seed=0)
        _, analytic = backward(model, triplets, config, dropout_masks=masks)

        from typeseek.projection import _batch_loss_and_grads

        grads = []
        eps = 1e-5
        for param in model.params():
            g = np.zeros_like(param)
            flat, gflat = param.reshape(-1), g.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                up, _ = _batch_loss_and_grads(model, triplets, margin, masks, False)
                flat[i] = orig - eps
                down, _ = _batch_loss_and_grads(model, triplets, margin, masks, False)
                flat[i] = orig
                gflat[i] = (up - down) / (2 * eps)
            grads.append(g)
        assert relative_error(analytic.arrays(), grads) < 1e-4

    def test_duplicate_triplet_linearity(self):
        # duplicating a triplet doubles its pre-average contribution, so the
        # batch mean is unchanged (tolerance: BLAS uses different FMA paths
        # for the two batch shapes)
        model, triplets, margin = random_gradcheck_case(23)
        config = TrainConfig(margin=margin, seed=0)
        single = [triplets[0]]
        doubled = [triplets[0], triplets[0]]
        l1, g1 = backward(model, single, config)
        l2, g2 = backward(model, doubled, config)
        assert l1 == pytest.approx(l2, rel=1e-12)
        for a, b in zip(g1.arrays(), g2.arrays()):
            assert np.allclose(a, b, rtol=1e-12, atol=1e-15)


class TestTrain:
    def separable_triplets(self, n=60, dim=12, seed=0):
        rng = np.random.default_rng(seed)
        c1, c2 = np.zeros(dim), np.zeros(dim)
        c1[0], c2[1] = 1.0, 1.0
        out = []
        for _ in range(n):
            out.append(
                Triplet(
                    anchor=c1 + 0.3 * rng.standard_normal(dim),
                    positive=c1 + 0.3 * rng.standard_normal(dim),
                    negative=c2 + 0.3 * rng.standard_normal(dim),
                )
            )
        return out

    def test_loss_decreases(self):
        model = ProjectionModel.initialize(12, 16, 8, dropout_rate=0.1, seed=0)
        config = TrainConfig(margin=0.2, learning_rate=1e-3, batch_size=16, epochs=5,
                             seed=0)
        _, trace = train(model, self.separable_triplets(), config)
        assert len(trace) == 5
        assert trace[-1] < trace[0]

    def test_zero_learning_rate_keeps_params_bitwise(self):
        model = ProjectionModel.initialize(12, 8, 6, dropout_rate=0.1, seed=1)
        before = [p.copy() for p in model.params()]
        config = TrainConfig(margin=0.2, learning_rate=0.0, batch_size=8, epochs=2,
                             seed=0)
        train(model, self.separable_triplets(20), config)
        for a, b in zip(before, model.params()):
            assert a.tobytes() == b.tobytes()

    def test_bitwise_reproducible(self):
        def run():
            model = ProjectionModel.initialize(12, 8, 6, dropout_rate=0.1, seed=4)
            config = TrainConfig(margin=0.2, learning_rate=1e-3, batch_size=8,
                                 epochs=3, seed=9)
            model, trace = train(model, self.separable_triplets(40, seed=2), config)
            return [p.tobytes() for p in model.params()], trace

        (p1, t1), (p2, t2) = run(), run()
        assert p1 == p2 and t1 == t2

    def test_non_finite_loss_aborts(self):
        model = ProjectionModel.initialize(12, 8, 6, dropout_rate=0.0, seed=0)
        model.w1 *= np.inf
        config = TrainConfig(margin=0.2, epochs=1, batch_size=8, seed=0)
        with np.errstate(invalid="ignore"), pytest.raises(
            (NonFiniteLossError, ZeroVectorError)
        ):
            train(model, self.separable_triplets(16), config)

    def test_empty_stream_rejected(self):
        model = ProjectionModel.initialize(12, 8, 6, seed=0)
        with pytest.raises(InvalidParamsError):
            train(model, [], TrainConfig())


class TestHardNegativeMining:
    def corpus_index(self):
        docs = {
            "d1": "Lake Tahoe region with the lake shore",
            "d2": "quantum chip fabrication plant",
            "d3": "a lake in the mountains",
        }
        return Bm25Index.build(docs.items())

    def test_fraction_zero_is_uniform(self):
        bm25 = self.corpus_index()
        candidates = [("d1", "s0"), ("d2", "s0"), ("d3", "s0")]
        rng = np.random.default_rng(0)
        picked = mine_hard_negatives("lake", candidates, 30, bm25, rng, fraction=0.0)
        assert len(picked) == 30
        assert {"d1", "d2", "d3"} == {doc for doc, _ in picked}  # all sampled

    def test_lexically_similar_candidate_mined_first(self):
        bm25 = Bm25Index.build(
            [("d1", "Lake Tahoe region"), ("d2", "quantum chip")]
        )
        rng = np.random.default_rng(0)
        picked = mine_hard_negatives(
            "lake", [("d1", "s0"), ("d2", "s0")], 2, bm25, rng, fraction=0.5
        )
        assert picked[0] == ("d1", "s0")  # the BM25 hit leads

    def test_fraction_one_is_bm25_descending(self):
        bm25 = self.corpus_index()
        candidates = [("d2", "s0"), ("d3", "s0"), ("d1", "s0")]
        rng = np.random.default_rng(0)
        picked = mine_hard_negatives("lake shore", candidates, 3, bm25, rng, fraction=1.0)
        from typeseek.lexical import tokenize

        scores = {d: bm25.score(tokenize("lake shore"), d) for d, _ in candidates}
        got_scores = [scores[d] for d, _ in picked]
        assert got_scores == sorted(got_scores, reverse=True)
        assert got_scores[0] > 0

    def test_all_zero_scores_falls_back_to_uniform(self):
        bm25 = self.corpus_index()
        candidates = [("d1", "s0"), ("d2", "s0"), ("d3", "s0")]
        rng = np.random.default_rng(3)
        picked = mine_hard_negatives("zzz unknown", candidates, 12, bm25, rng,
                                     fraction=0.5)
        assert len(picked) == 12


class TestBuildTriplets:
    def corpus_store(self):
        docs, store = [], RepresentationStore()
        rng = np.random.default_rng(0)
        for t, type_name in enumerate(["bird", "drug"]):
            for m in range(3):
                doc_id = f"{type_name}{m}"
                surface = f"ent{t}{m}"
                docs.append(
                    Document(
                        doc_id,
                        f"{surface} text",
                        spans=[EntitySpan("s0", 0, len(surface), surface,
                                          frozenset({type_name}))],
                    )
                )
                store.add(KEY, doc_id, "s0", rng.standard_normal(6).astype(np.float32))
        anchors = {
            "bird": ("bird", rng.standard_normal(6)),
            "drug": ("drug", rng.standard_normal(6)),
        }
        return Corpus(docs), store, anchors

    def test_two_types_cross_negatives(self):
        corpus, store, anchors = self.corpus_store()
        config = TrainConfig(seed=0)
        triplets = list(
            build_triplets(corpus, store, KEY, anchors, ["bird", "drug"], [], 1, config)
        )
        assert len(triplets) == 2
        for t in triplets:
            assert t.anchor.shape == (6,)

    def test_deterministic(self):
        corpus, store, anchors = self.corpus_store()
        config = TrainConfig(seed=5)

        def collect():
            return [
                (t.anchor.tobytes(), t.positive.tobytes(), t.negative.tobytes())
                for t in build_triplets(corpus, store, KEY, anchors,
                                        ["bird", "drug"], [], 4, config)
            ]

        assert collect() == collect()

    def test_test_split_violation(self):
        corpus, store, anchors = self.corpus_store()
        with pytest.raises(TypeSplitViolationError):
            list(build_triplets(corpus, store, KEY, anchors, ["bird"], ["bird"], 1,
                                TrainConfig(seed=0)))

    def test_type_without_mentions(self):
        corpus, store, anchors = self.corpus_store()
        anchors["fish"] = ("fish", np.zeros(6))
        with pytest.raises(TypeWithoutMentionsError):
            list(build_triplets(corpus, store, KEY, anchors, ["fish"], [], 1,
                                TrainConfig(seed=0)))


class TestCheckpoint:
    def test_roundtrip_bit_identical(self, tmp_path):
        model = ProjectionModel.initialize(10, 6, 4, dropout_rate=0.1, seed=7)
        path = tmp_path / "model.nrpm"
        save_model(model, path, extra={"note": "unit test", "seed": 7})
        loaded, extra = load_model(path)
        assert extra == {"note": "unit test", "seed": 7}
        assert loaded.in_dim == 10 and loaded.out_dim == 4
        path2 = tmp_path / "model2.nrpm"
        save_model(loaded, path2, extra=extra)
        assert path.read_bytes() == path2.read_bytes()

    def test_float32_quantization_is_idempotent(self, tmp_path):
        model = ProjectionModel.initialize(10, 6, 4, seed=7)
        p1 = tmp_path / "a.nrpm"
        save_model(model, p1)
        m1, _ = load_model(p1)
        out1 = forward(m1, np.arange(10, dtype=float))
        p2 = tmp_path / "b.nrpm"
        save_model(m1, p2)
        m2, _ = load_model(p2)
        assert np.array_equal(out1, forward(m2, np.arange(10, dtype=float)))

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.nrpm"
        path.write_bytes(b"NOPEv1" + b"\x00" * 32)
        with pytest.raises(CorruptCheckpointError):
            load_model(path)

    def test_truncated(self, tmp_path):
        model = ProjectionModel.initialize(10, 6, 4, seed=7)
        path = tmp_path / "model.nrpm"
        save_model(model, path)
        clipped = tmp_path / "clipped.nrpm"
        clipped.write_bytes(path.read_bytes()[:-9])
        with pytest.raises(CorruptCheckpointError):
            load_model(clipped)

    def test_trailing_garbage(self, tmp_path):
        model = ProjectionModel.initialize(4, 3, 2, seed=0)
        path = tmp_path / "model.nrpm"
        save_model(model, path)
        bloated = tmp_path / "bloated.nrpm"
        bloated.write_bytes(path.read_bytes() + b"xx")
        with pytest.raises(CorruptCheckpointError):
            load_model(bloated)

"""Tokenization, corpus building, skip-gram training, feature assembly."""

import numpy as np
import pytest

from patchscout.alpha_ast import UNCHANGED, AlphaAst, AlphaNode, diff_asts
from patchscout.ast_core import parse_source
from patchscout.embedding import (
    EmbeddingTable,
    SkipGramConfig,
    TokenCorpus,
    UNK_TOKEN,
    assemble_features,
    build_corpus,
    node_tokens,
    sgns_gradients,
    sgns_objective,
    split_label,
    train_skipgram,
)
from patchscout.errors import DegenerateCorpusError, EmptyCorpusError


def graph_of(source: str) -> AlphaAst:
    ast = parse_source(source, "a.c")
    return diff_asts(ast, ast)


def single_node(kind: str, label, ann: str = UNCHANGED) -> AlphaNode:
    return AlphaNode(0, kind, label, ann,
                     0 if ann != "A" else None, 0 if ann != "D" else None)


class TestNodeTokens:
    def test_underscore_split(self):
        assert node_tokens(single_node("Identifier", "BUF_SIZE")) == \
            ["Identifier", "buf", "size"]

    def test_unlabeled(self):
        assert node_tokens(single_node("IfStmt", None)) == ["IfStmt"]

    def test_camel_case(self):
        assert node_tokens(single_node("Identifier", "maxRetryCount")) == \
            ["Identifier", "max", "retry", "count"]

    def test_operator_label_kept_whole(self):
        assert node_tokens(single_node("BinaryExpr", "<")) == ["BinaryExpr", "<"]

    def test_digits(self):
        assert split_label("buf2ptr") == ["buf", "2", "ptr"]
        assert split_label("HTTPServer") == ["http", "server"]


class TestBuildCorpus:
    def test_min_count_one_keeps_everything(self):
        g = graph_of("int f() { return BUF_SIZE; }")
        corpus = build_corpus([g], min_count=1)
        assert UNK_TOKEN not in corpus.vocab
        flat = {t for s in corpus.sentences for t in s}
        assert flat == set(corpus.vocab)

    def test_huge_min_count_is_empty(self):
        g = graph_of("int f() { return 0; }")
        with pytest.raises(EmptyCorpusError):
            build_corpus([g], min_count=10_000)

    def test_shared_token_survives_min_count_two(self):
        g1 = graph_of("int f() { return buf; }")
        g2 = graph_of("int g() { return buf; }")
        corpus = build_corpus([g1, g2], min_count=2)
        assert "buf" in corpus.vocab
        assert "f" not in corpus.vocab  # singleton
        _, freq = corpus.vocab["buf"]
        assert freq == 2
        assert any(UNK_TOKEN in s for s in corpus.sentences)

    def test_indices_dense_by_frequency_then_lex(self):
        g = graph_of("int f() { a = a + b; a = a + c; }")
        corpus = build_corpus([g], min_count=1)
        tokens = corpus.tokens_by_index()
        freqs = [corpus.vocab[t][1] for t in tokens]
        assert freqs == sorted(freqs, reverse=True)
        for earlier, later in zip(tokens, tokens[1:]):
            if corpus.vocab[earlier][1] == corpus.vocab[later][1]:
                assert earlier < later

    def test_sentence_order_is_graph_id_order(self):
        g = graph_of("int f() { return 0; }")
        corpus = build_corpus([g], min_count=1)
        expected = []
        for node in g.nodes:
            expected.extend(node_tokens(node))
        assert corpus.sentences[0] == expected


class TestSkipGram:
    def test_shapes_and_finiteness(self):
        corpus = TokenCorpus([["a", "b"]] * 4, {"a": (0, 4), "b": (1, 4)})
        table = train_skipgram(corpus, SkipGramConfig(dim=4, epochs=2, min_count=1))
        assert table.vectors.shape == (2, 4)
        assert np.all(np.isfinite(table.vectors))
        assert np.all(np.isfinite(table.unk_vector))

    def test_deterministic(self):
        corpus = TokenCorpus([["a", "b", "c"]] * 6,
                             {"a": (0, 6), "b": (1, 6), "c": (2, 6)})
        cfg = SkipGramConfig(dim=8, epochs=3, seed=9)
        t1 = train_skipgram(corpus, cfg)
        t2 = train_skipgram(corpus, cfg)
        assert np.array_equal(t1.vectors, t2.vectors)
        assert np.array_equal(t1.unk_vector, t2.unk_vector)

    def test_cooccurring_tokens_closer_than_unrelated(self):
        # Two disjoint co-occurrence clusters; within-cluster similarity must
        # beat cross-cluster.  (A bare two-token corpus is degenerate: the
        # SGNS optimum anti-aligns the input vectors of exclusive partners,
        # so shared contexts are what "similar" means here.)
        import random as stdlib_random

        rnd = stdlib_random.Random(4)
        cluster1, cluster2 = ["a", "b", "x", "y"], ["c", "q", "r", "s"]
        sentences = []
        for _ in range(60):
            sentences.append(rnd.sample(cluster1, 3))
            sentences.append(rnd.sample(cluster2, 3))
        freq: dict[str, int] = {}
        for s in sentences:
            for t in s:
                freq[t] = freq.get(t, 0) + 1
        order = sorted(freq, key=lambda t: (-freq[t], t))
        vocab = {t: (i, freq[t]) for i, t in enumerate(order)}
        table = train_skipgram(TokenCorpus(sentences, vocab),
                               SkipGramConfig(dim=16, window=2, epochs=5, seed=4))

        def cos(x, y):
            return float(x @ y / (np.linalg.norm(x) * np.linalg.norm(y)))

        a, b, c = table.vector("a"), table.vector("b"), table.vector("c")
        assert cos(a, b) > cos(a, c)

    def test_degenerate_corpora_rejected(self):
        with pytest.raises(DegenerateCorpusError):
            train_skipgram(TokenCorpus([["a"]], {"a": (0, 1)}))
        # two tokens but never inside one window
        corpus = TokenCorpus([["a"], ["b"]], {"a": (0, 1), "b": (1, 1)})
        with pytest.raises(DegenerateCorpusError):
            train_skipgram(corpus, SkipGramConfig(window=1))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(12)
        center = rng.normal(size=6)
        context = rng.normal(size=6)
        negatives = rng.normal(size=(3, 6))
        g_center, g_context, g_negatives = sgns_gradients(center, context, negatives)
        eps = 1e-6

        def fd(array, grad):
            it = np.nditer(array, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = array[idx]
                array[idx] = orig + eps
                hi = sgns_objective(center, context, negatives)
                array[idx] = orig - eps
                lo = sgns_objective(center, context, negatives)
                array[idx] = orig
                numeric = (hi - lo) / (2 * eps)
                denom = max(abs(numeric), abs(grad[idx]), 1e-8)
                assert abs(numeric - grad[idx]) / denom < 1e-5

        fd(center, g_center)
        fd(context, g_context)
        fd(negatives, g_negatives)

    def test_unk_vector_is_mean(self):
        corpus = TokenCorpus([["a", "b"]] * 5, {"a": (0, 5), "b": (1, 5)})
        table = train_skipgram(corpus, SkipGramConfig(dim=4, epochs=1))
        assert np.allclose(table.unk_vector, table.vectors.mean(axis=0))


class TestTableIO:
    def test_roundtrip(self, tmp_path):
        corpus = TokenCorpus([["a", "b", "c"]] * 4,
                             {"a": (0, 4), "b": (1, 4), "c": (2, 4)})
        table = train_skipgram(corpus, SkipGramConfig(dim=6, epochs=1, seed=2))
        path = str(tmp_path / "emb.psemb")
        table.save(path)
        loaded = EmbeddingTable.load(path)
        assert np.array_equal(loaded.vectors, table.vectors)
        assert np.array_equal(loaded.unk_vector, table.unk_vector)
        assert loaded.tokens == table.tokens
        assert loaded.config == table.config

    def test_save_is_byte_deterministic(self, tmp_path):
        corpus = TokenCorpus([["a", "b"]] * 4, {"a": (0, 4), "b": (1, 4)})
        cfg = SkipGramConfig(dim=4, epochs=2, seed=3)
        p1, p2 = str(tmp_path / "one"), str(tmp_path / "two")
        train_skipgram(corpus, cfg).save(p1)
        train_skipgram(corpus, cfg).save(p2)
        assert open(p1, "rb").read() == open(p2, "rb").read()

    def test_bad_magic_rejected(self, tmp_path):
        from patchscout.errors import VersionMismatchError

        path = tmp_path / "bogus"
        path.write_bytes(b"NOTRIGHT" + b"\x00" * 64)
        with pytest.raises(VersionMismatchError):
            EmbeddingTable.load(str(path))


class TestAssembleFeatures:
    def make_table(self):
        vectors = np.array([[1.0, 2.0], [3.0, 4.0]])
        unk = np.array([-1.0, -1.0])
        return EmbeddingTable(vectors, unk, ["IfStmt", "buf"], SkipGramConfig(dim=2))

    def test_single_token_added_node(self):
        table = self.make_table()
        g = AlphaAst([AlphaNode(0, "IfStmt", None, "A", None, 0)], [], 0)
        feats = assemble_features(g, table)
        assert feats.shape == (1, 5)
        assert np.array_equal(feats[0], [1.0, 2.0, 0.0, 1.0, 0.0])

    def test_two_tokens_mean(self):
        table = self.make_table()
        g = AlphaAst([AlphaNode(0, "IfStmt", "buf", "U", 0, 0)], [], 0)
        feats = assemble_features(g, table)
        assert np.array_equal(feats[0, :2], [2.0, 3.0])
        assert np.array_equal(feats[0, 2:], [1.0, 0.0, 0.0])

    def test_oov_label_uses_unk(self):
        table = self.make_table()
        g = AlphaAst([AlphaNode(0, "Mystery", None, "D", 0, None)], [], 0)
        feats = assemble_features(g, table)
        assert np.array_equal(feats[0, :2], [-1.0, -1.0])
        assert np.array_equal(feats[0, 2:], [0.0, 0.0, 1.0])

    def test_dimension_and_one_hot_block(self):
        table = self.make_table()
        g = graph_of("int f() { if (x) return 1; return 0; }")
        feats = assemble_features(g, table)
        assert feats.shape == (len(g.nodes), 5)
        one_hot = feats[:, 2:]
        assert np.all(one_hot.sum(axis=1) == 1.0)
        assert set(np.unique(one_hot)) <= {0.0, 1.0}

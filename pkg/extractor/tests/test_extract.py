import json

import pytest

from conftest import TINY_CONTEXT, TINY_HIDDEN, TINY_KV_DIM, TINY_LAYERS
from spanprobe.cli import parse_blocks
from spanprobe.corpusio import Doc, Span, read_corpus, write_corpus
from spanprobe.extract import extract
from spanprobe.hooks import CaptureError, CaptureSession, HookSpec, decoder_layers


def docs_small():
    return [
        Doc("d0", "The report mentioned Everest several times .",
            spans=[Span("s0", 21, 28, ("mountain",))]),
        Doc("d1", "Researchers discussed aspirin during the meeting .",
            spans=[Span("s0", 22, 29, ("medication",))]),
    ]


class TestHookSpec:
    def test_bad_token_rule(self):
        with pytest.raises(CaptureError):
            HookSpec("m", points=((0, "attn.v"),), token_rules=("word-start",))

    def test_no_points(self):
        with pytest.raises(CaptureError):
            HookSpec("m", points=())

    def test_unknown_component(self, tiny_model):
        with pytest.raises(CaptureError, match="unknown component"):
            with CaptureSession(tiny_model, [(0, "attn.zz")]):
                pass

    def test_block_out_of_range(self, tiny_model):
        with pytest.raises(CaptureError, match="out of range"):
            with CaptureSession(tiny_model, [(TINY_LAYERS, "attn.v")]):
                pass

    def test_layer_discovery(self, tiny_model):
        assert len(decoder_layers(tiny_model)) == TINY_LAYERS


class TestParseBlocks:
    def test_range(self):
        assert parse_blocks("0..3") == [0, 1, 2, 3]

    def test_list(self):
        assert parse_blocks("1,5,17") == [1, 5, 17]

    def test_all(self):
        assert parse_blocks("all", num_layers=3) == [0, 1, 2]


class TestExtract:
    def spec(self, token_rules=("span-end",)):
        return HookSpec(
            "tiny", points=((1, "attn.v"), (TINY_LAYERS - 1, "block.out")),
            token_rules=token_rules,
        )

    def test_record_count_and_dims(self, tiny_model, tiny_tokenizer, tmp_path):
        out = tmp_path / "dump.jsonl"
        stats = extract(docs_small()[:1], self.spec(), out,
                        model=tiny_model, tokenizer=tiny_tokenizer)
        assert stats.documents == 1
        assert stats.records == 2  # one span x two capture points
        records = [json.loads(line) for line in out.read_text().splitlines()]
        dims = {r["component"]: r["dim"] for r in records}
        # v projection carries the kv-head width, the block output the full width
        assert dims["attn.v"] == TINY_KV_DIM
        assert dims["block.out"] == TINY_HIDDEN
        assert all(len(r["vector"]) == r["dim"] for r in records)

    def test_eos_records(self, tiny_model, tiny_tokenizer, tmp_path):
        out = tmp_path / "dump.jsonl"
        stats = extract(docs_small(), self.spec(("span-end", "eos")), out,
                        model=tiny_model, tokenizer=tiny_tokenizer)
        records = [json.loads(line) for line in out.read_text().splitlines()]
        eos = [r for r in records if r["span_id"] == "EOS"]
        assert len(eos) == 2 * 2  # one per doc per capture point
        assert stats.records == len(records) == 8

    def test_deterministic(self, tiny_model, tiny_tokenizer, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        for out in (a, b):
            extract(docs_small(), self.spec(("span-end", "eos")), out,
                    model=tiny_model, tokenizer=tiny_tokenizer)
        assert a.read_bytes() == b.read_bytes()

    def test_unalignable_span_skipped(self, tiny_model, tiny_tokenizer, tmp_path):
        doc = Doc("d", "alpha beta", spans=[
            Span("bad", 5, 6, ("x",)),   # the whitespace gap
            Span("ok", 6, 10, ("y",)),
        ])
        out = tmp_path / "dump.jsonl"
        stats = extract([doc], self.spec(), out,
                        model=tiny_model, tokenizer=tiny_tokenizer)
        assert stats.skipped_spans == [("d", "bad")]
        records = [json.loads(line) for line in out.read_text().splitlines()]
        assert {r["span_id"] for r in records} == {"ok"}

    def test_long_document_skipped(self, tiny_model, tiny_tokenizer, tmp_path):
        long_doc = Doc("long", "pad " * (TINY_CONTEXT + 10),
                       spans=[Span("s0", 0, 3, ("x",))])
        out = tmp_path / "dump.jsonl"
        stats = extract([long_doc] + docs_small(), self.spec(), out,
                        model=tiny_model, tokenizer=tiny_tokenizer)
        assert stats.skipped_docs == ["long"]
        assert stats.documents == 2

    def test_binary_dump(self, tiny_model, tiny_tokenizer, tmp_path):
        out = tmp_path / "dump.nrd"
        extract(docs_small(), self.spec(), out,
                model=tiny_model, tokenizer=tiny_tokenizer, binary=True)
        assert out.read_bytes()[:5] == b"NRDv1"


class TestInterchange:
    """The dumps must load cleanly in the retrieval engine (shared formats)."""

    def test_corpus_and_dump_validate_in_engine(self, tiny_model, tiny_tokenizer,
                                                tmp_path):
        typeseek_corpus = pytest.importorskip("typeseek.corpus")
        typeseek_represent = pytest.importorskip("typeseek.represent")

        corpus_path = tmp_path / "corpus.jsonl"
        write_corpus(docs_small(), corpus_path)
        dump_path = tmp_path / "dump.jsonl"
        spec = HookSpec("tiny", points=((0, "attn.v"), (1, "norm.attn"),
                                        (2, "mlp.down"), (3, "block.out")),
                        token_rules=("span-end", "eos"))
        extract(corpus_path, spec, dump_path,
                model=tiny_model, tokenizer=tiny_tokenizer)

        corpus = typeseek_corpus.load_corpus(corpus_path)
        store = typeseek_represent.load_dump(dump_path, corpus=corpus)
        assert store.num_records() == 2 * 4 * 2  # (span + EOS) x points x docs
        assert store.dim(typeseek_represent.RepresentationKey(0, "attn.v")) == TINY_KV_DIM

    def test_roundtrip_through_own_reader(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_corpus(docs_small(), path)
        loaded = list(read_corpus(path))
        assert [d.doc_id for d in loaded] == ["d0", "d1"]
        assert loaded[0].spans[0].types == ("mountain",)

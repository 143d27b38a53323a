import pytest
import torch
from tokenizers import Tokenizer, models, pre_tokenizers
from transformers import LlamaConfig, LlamaForCausalLM, PreTrainedTokenizerFast

from spanprobe.samples import sample_corpus

TINY_HIDDEN = 32
TINY_KV_DIM = 16  # 2 kv heads x 8 head_dim
TINY_LAYERS = 4
TINY_CONTEXT = 64


def build_vocab() -> dict[str, int]:
    pre = pre_tokenizers.Whitespace()
    words = set()
    for doc in sample_corpus():
        words.update(w for w, _ in pre.pre_tokenize_str(doc.text))
    words.update(["alpha", "beta", "gamma", "delta", "pad"])
    vocab = {"[UNK]": 0, "</s>": 1}
    for w in sorted(words):
        vocab[w] = len(vocab)
    return vocab


@pytest.fixture(scope="session")
def tiny_tokenizer():
    tok = Tokenizer(models.WordLevel(build_vocab(), unk_token="[UNK]"))
    tok.pre_tokenizer = pre_tokenizers.Whitespace()
    return PreTrainedTokenizerFast(
        tokenizer_object=tok, unk_token="[UNK]", eos_token="</s>"
    )


@pytest.fixture(scope="session")
def tiny_model(tiny_tokenizer):
    config = LlamaConfig(
        vocab_size=len(tiny_tokenizer),
        hidden_size=TINY_HIDDEN,
        intermediate_size=64,
        num_hidden_layers=TINY_LAYERS,
        num_attention_heads=4,
        num_key_value_heads=2,
        max_position_embeddings=TINY_CONTEXT,
    )
    torch.manual_seed(1234)
    model = LlamaForCausalLM(config)
    model.eval()
    return model

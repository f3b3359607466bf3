import gzip
import logging

import pytest
import torch

from vlfas.tokenizer import BpeTokenizer, bytes_to_unicode


def test_byte_level_vocab_size(tokenizer):
    # 256 byte symbols + 256 word-final variants + two sentinels
    assert tokenizer.vocab_size == 514
    assert tokenizer.sot_id == 512
    assert tokenizer.eot_id == 513


def test_bytes_to_unicode_reversible():
    mapping = bytes_to_unicode()
    assert len(mapping) == 256
    assert len(set(mapping.values())) == 256


def test_encode_is_deterministic_and_lowercases(tokenizer):
    a = tokenizer.encode("This is a REAL face")
    b = tokenizer.encode("this is a real face")
    assert a == b
    assert a == tokenizer.encode("This is a REAL face")


def test_byte_level_word_ends_marked(tokenizer):
    ids = tokenizer.encode("hi")
    # 'h' plain byte symbol, then 'i</w>' word-final symbol
    assert len(ids) == 2
    assert tokenizer.decoder[ids[0]] == "h"
    assert tokenizer.decoder[ids[1]] == "i</w>"


def test_tokenize_shapes_and_sentinels(tokenizer):
    tokens, eot = tokenizer.tokenize(["hello world", "hi"])
    assert tokens.shape == (2, 77)
    assert tokens.dtype == torch.long
    for row in range(2):
        assert tokens[row, 0] == tokenizer.sot_id
        assert tokens[row, eot[row]] == tokenizer.eot_id
        assert (tokens[row, eot[row] + 1 :] == 0).all()


def test_tokenize_rejects_empty(tokenizer):
    with pytest.raises(ValueError):
        tokenizer.tokenize("")
    with pytest.raises(ValueError):
        tokenizer.tokenize("   ")


def test_truncation_warns_and_keeps_eot(tokenizer, caplog):
    long_prompt = "x" * 200
    with caplog.at_level(logging.WARNING, logger="vlfas.tokenizer"):
        tokens, eot = tokenizer.tokenize(long_prompt)
    assert any("truncated" in rec.message for rec in caplog.records)
    assert eot[0] == 76
    assert tokens[0, 76] == tokenizer.eot_id


def test_merges_are_applied(tmp_path):
    # A tiny merges file: header line, then two ranked merges. With them,
    # "hello" must merge 'h'+'e' first, then 'he'+'l'.
    merges = tmp_path / "merges.txt.gz"
    with gzip.open(merges, "wt", encoding="utf-8") as fh:
        fh.write("#version: tiny\n")
        fh.write("h e\n")
        fh.write("he l\n")
    tok = BpeTokenizer(str(merges))
    assert tok.vocab_size == 514 + 2
    pieces = tok.bpe("hello").split(" ")
    assert pieces == ["hel", "l", "o</w>"]
    plain = BpeTokenizer()
    assert plain.bpe("hello").split(" ") == ["h", "e", "l", "l", "o</w>"]


def test_merges_budget_ignores_trailing_lines(tmp_path):
    # the published file carries symbol lines past the merge section; only
    # the budgeted merge lines after the header may contribute to the vocab
    budget = 49152 - 256 - 2  # merged symbols the vocabulary has room for
    merges = tmp_path / "big_merges.txt.gz"
    with gzip.open(merges, "wt", encoding="utf-8") as fh:
        fh.write("#version: big\n")
        for i in range(budget + 500):
            fh.write(f"a{i} b{i}\n")
    tok = BpeTokenizer(str(merges))
    assert tok.vocab_size == 512 + budget + 2 == 49408


def test_contraction_split(tokenizer):
    # "isn't" splits into "isn" + "'t" before byte encoding
    ids_full = tokenizer.encode("isn't")
    ids_parts = tokenizer.encode("isn") + tokenizer.encode("'t")
    assert ids_full == ids_parts


def test_punctuation_groups_separately(tokenizer):
    ids = tokenizer.encode("face!!")
    tail = [tokenizer.decoder[i] for i in ids[-2:]]
    assert tail == ["!", "!</w>"]

"""Byte-pair-encoding tokenizer for the text tower.

Reads the published gzip merges file of the pretrained dual encoder when a
path is given (49,408 symbols, 77-token context). Without a merges file it
degrades to a byte-level vocabulary (zero merges, 514 symbols) so miniature
randomly initialized text encoders can run through the identical code path.
"""

from __future__ import annotations

import gzip
import html
import logging
import re

import torch

logger = logging.getLogger(__name__)

SOT_TOKEN = "<|startoftext|>"
EOT_TOKEN = "<|endoftext|>"

# Split pattern: special tokens, apostrophe contractions, letter runs, single
# digits, then runs of everything else that is not whitespace. Stdlib `re` has
# no \p{L}/\p{N}, so letters are [^\W\d_] and the residual class is written
# with lookaheads.
_TOKEN_PATTERN = re.compile(
    r"<\|startoftext\|>|<\|endoftext\|>|'s|'t|'re|'ve|'m|'ll|'d"
    r"|[^\W\d_]+|\d|(?:(?![^\W\d_])(?!\d)\S)+",
    re.IGNORECASE,
)


def bytes_to_unicode() -> dict[int, str]:
    """Reversible byte -> printable-unicode map used by the published vocabulary."""
    bs = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(ord("\xa1"), ord("\xac") + 1))
        + list(range(ord("\xae"), ord("\xff") + 1))
    )
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return dict(zip(bs, [chr(c) for c in cs]))


def _get_pairs(word: tuple[str, ...]) -> set[tuple[str, str]]:
    return set(zip(word[:-1], word[1:]))


def _clean(text: str) -> str:
    text = html.unescape(html.unescape(text))
    text = re.sub(r"\s+", " ", text)
    return text.strip().lower()


def read_merges(path: str) -> list[tuple[str, str]]:
    """Read a merges file (gzip or plain text, one space-separated pair per line).

    The published file carries a version header on line 1 and trailing symbol
    lines past the merge section; both are dropped, matching the pretrained
    model's vocabulary construction.
    """
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rt", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    lines = lines[1 : 49152 - 256 - 2 + 1]
    return [tuple(line.split()) for line in lines if line.strip()]


class BpeTokenizer:
    """Text -> token-id sequences with start/end sentinels and fixed context.

    Prompts longer than the context window are truncated (end sentinel kept)
    and a warning is logged.
    """

    def __init__(self, merges_path: str | None = None, context_length: int = 77):
        self.context_length = context_length
        self.byte_encoder = bytes_to_unicode()
        merges = read_merges(merges_path) if merges_path else []
        vocab = list(self.byte_encoder.values())
        vocab = vocab + [v + "</w>" for v in vocab]
        for merge in merges:
            vocab.append("".join(merge))
        vocab.extend([SOT_TOKEN, EOT_TOKEN])
        self.encoder = {token: i for i, token in enumerate(vocab)}
        self.decoder = {i: token for token, i in self.encoder.items()}
        self.bpe_ranks = dict(zip(merges, range(len(merges))))
        self._cache: dict[str, str] = {SOT_TOKEN: SOT_TOKEN, EOT_TOKEN: EOT_TOKEN}

    @property
    def vocab_size(self) -> int:
        return len(self.encoder)

    @property
    def sot_id(self) -> int:
        return self.encoder[SOT_TOKEN]

    @property
    def eot_id(self) -> int:
        return self.encoder[EOT_TOKEN]

    def bpe(self, token: str) -> str:
        if token in self._cache:
            return self._cache[token]
        word = tuple(token[:-1]) + (token[-1] + "</w>",)
        pairs = _get_pairs(word)
        if not pairs:
            return token + "</w>"

        while True:
            bigram = min(pairs, key=lambda pair: self.bpe_ranks.get(pair, float("inf")))
            if bigram not in self.bpe_ranks:
                break
            first, second = bigram
            new_word: list[str] = []
            i = 0
            while i < len(word):
                try:
                    j = word.index(first, i)
                except ValueError:
                    new_word.extend(word[i:])
                    break
                new_word.extend(word[i:j])
                i = j
                if word[i] == first and i < len(word) - 1 and word[i + 1] == second:
                    new_word.append(first + second)
                    i += 2
                else:
                    new_word.append(word[i])
                    i += 1
            word = tuple(new_word)
            if len(word) == 1:
                break
            pairs = _get_pairs(word)

        merged = " ".join(word)
        self._cache[token] = merged
        return merged

    def encode(self, text: str) -> list[int]:
        """Token ids for one text, without sentinels or padding."""
        ids: list[int] = []
        for token in _TOKEN_PATTERN.findall(_clean(text)):
            token = "".join(self.byte_encoder[b] for b in token.encode("utf-8"))
            ids.extend(self.encoder[piece] for piece in self.bpe(token).split(" "))
        return ids

    def tokenize(self, texts: str | list[str]) -> tuple[torch.Tensor, torch.Tensor]:
        """Batch of padded id sequences plus the end-sentinel position per row.

        Returns ``(tokens, eot_positions)`` with ``tokens`` of shape
        ``[batch, context_length]`` (zero-padded) and ``eot_positions`` of
        shape ``[batch]``.
        """
        if isinstance(texts, str):
            texts = [texts]
        if not texts:
            raise ValueError("tokenize needs at least one text")
        tokens = torch.zeros(len(texts), self.context_length, dtype=torch.long)
        eot_positions = torch.zeros(len(texts), dtype=torch.long)
        for row, text in enumerate(texts):
            if not text or not text.strip():
                raise ValueError("cannot tokenize an empty prompt")
            ids = [self.sot_id] + self.encode(text) + [self.eot_id]
            if len(ids) > self.context_length:
                logger.warning(
                    "prompt of %d tokens exceeds the %d-token context and was truncated: %r",
                    len(ids), self.context_length, text,
                )
                ids = ids[: self.context_length - 1] + [self.eot_id]
            tokens[row, : len(ids)] = torch.tensor(ids, dtype=torch.long)
            eot_positions[row] = len(ids) - 1
        return tokens, eot_positions

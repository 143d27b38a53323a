"""Character-span to token alignment via tokenizer offset mappings."""

from __future__ import annotations


class AlignmentFailure(ValueError):
    """No token's character range intersects the span."""


def span_end_token(offsets, char_start: int, char_end: int) -> int:
    """Index of the last token whose character range intersects the span.

    ``offsets`` is the tokenizer's offset mapping: per token a half-open
    (start, end) character pair, with (0, 0) entries for special tokens.
    The span-end token is the natural representation point for decoder
    models, being the only span token that attends to the full span.
    """
    best = -1
    for i, (tok_start, tok_end) in enumerate(offsets):
        if tok_start == tok_end:  # special token, no surface
            continue
        if tok_start < char_end and tok_end > char_start:
            best = i
    if best < 0:
        raise AlignmentFailure(
            f"no token overlaps span [{char_start}, {char_end})"
        )
    return best

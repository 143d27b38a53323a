import pytest

from spanprobe.align import AlignmentFailure, span_end_token


class TestSpanEndToken:
    offsets = [(0, 0), (0, 5), (6, 10), (11, 16), (0, 0)]  # specials at both ends

    def test_single_token_span(self):
        assert span_end_token(self.offsets, 6, 10) == 2

    def test_multi_token_span_takes_last(self):
        assert span_end_token(self.offsets, 0, 10) == 2
        assert span_end_token(self.offsets, 0, 16) == 3

    def test_partial_overlap_counts(self):
        # span covering only part of a token still intersects it
        assert span_end_token(self.offsets, 8, 12) == 3

    def test_special_tokens_ignored(self):
        # (0, 0) specials never match even for spans at offset zero
        assert span_end_token(self.offsets, 0, 3) == 1

    def test_gap_raises(self):
        with pytest.raises(AlignmentFailure):
            span_end_token(self.offsets, 5, 6)  # the whitespace between tokens

    def test_beyond_text_raises(self):
        with pytest.raises(AlignmentFailure):
            span_end_token(self.offsets, 100, 120)

"""Pooling is exact on hand-set hidden states and ignores padding."""
import numpy as np
import pytest

from embed_extractor.pooling import last_token_pool, mean_pool, pool


HIDDEN = np.array(
    [
        [1.0, 2.0, 3.0],
        [4.0, 5.0, 6.0],
        [7.0, 8.0, 9.0],
    ]
)


class TestHandSetThreeTokens:
    def test_mean_is_arithmetic_mean(self):
        out = mean_pool(HIDDEN, np.array([1, 1, 1]))
        np.testing.assert_array_equal(out, np.array([4.0, 5.0, 6.0]))

    def test_last_token_is_position_two(self):
        out = last_token_pool(HIDDEN, np.array([1, 1, 1]))
        np.testing.assert_array_equal(out, HIDDEN[2])

    def test_padding_masked_out_of_mean(self):
        # Same sequence padded with a junk row: identical result.
        padded = np.vstack([HIDDEN, [[100.0, 100.0, 100.0]]])
        out = mean_pool(padded, np.array([1, 1, 1, 0]))
        np.testing.assert_array_equal(out, mean_pool(HIDDEN, np.ones(3)))

    def test_padding_masked_out_of_last_token(self):
        padded = np.vstack([HIDDEN, [[100.0, 100.0, 100.0]]])
        out = last_token_pool(padded, np.array([1, 1, 1, 0]))
        np.testing.assert_array_equal(out, HIDDEN[2])


class TestEdges:
    def test_single_position_modes_agree(self):
        states = np.array([[3.5, -1.0]])
        mask = np.array([1])
        np.testing.assert_array_equal(
            mean_pool(states, mask), last_token_pool(states, mask)
        )

    def test_all_padding_rejected(self):
        with pytest.raises(ValueError):
            mean_pool(HIDDEN, np.zeros(3))
        with pytest.raises(ValueError):
            last_token_pool(HIDDEN, np.zeros(3))

    def test_mask_length_checked(self):
        with pytest.raises(ValueError):
            mean_pool(HIDDEN, np.ones(2))

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            pool(HIDDEN, np.ones(3), "max")

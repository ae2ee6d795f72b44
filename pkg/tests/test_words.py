"""Tests for free-group words."""

import pytest
from hypothesis import given, settings, strategies as st

from affine_schottky.words import (
    Letter,
    Word,
    WordMode,
    alphabet,
    count_reduced_words,
    enumerate_words,
    word_from_pairs,
)

words_text = st.text(alphabet="aAbBcC", max_size=12)


class TestLetters:
    def test_rendering(self):
        assert str(Letter(0, 1)) == "a"
        assert str(Letter(1, -1)) == "B"

    def test_parse(self):
        assert Letter.parse("C") == Letter(2, -1)

    def test_inverse(self):
        assert Letter(3, 1).inverse() == Letter(3, -1)

    @pytest.mark.parametrize("index, sign", [(-1, 1), (26, 1), (0, 0), (0, 2)])
    def test_invalid(self, index, sign):
        with pytest.raises(ValueError):
            Letter(index, sign)

    def test_parse_non_letter(self):
        with pytest.raises(ValueError):
            Letter.parse("1")

    def test_alphabet_order(self):
        assert [str(x) for x in alphabet(2)] == ["a", "A", "b", "B"]


class TestWords:
    def test_identity_renders_as_e(self):
        assert str(Word.identity()) == "e"
        assert len(Word.identity()) == 0

    def test_reduction(self):
        assert str(Word.parse("abBA").reduced()) == "e"
        assert str(Word.parse("aabBc").reduced()) == "aac"

    def test_cyclic_reduction(self):
        word = Word.parse("baAcB")
        assert not word.is_reduced
        assert str(word.cyclically_reduced()) == "c"
        assert Word.parse("abA").is_reduced
        assert not Word.parse("abA").is_cyclically_reduced

    def test_product_cancels(self):
        assert str(Word.parse("ab") * Word.parse("Bc")) == "ac"

    def test_powers(self):
        assert str(Word.parse("ab") ** 2) == "abab"
        assert str(Word.parse("ab") ** -1) == "BA"
        assert str(Word.parse("ab") ** 0) == "e"

    def test_from_pairs(self):
        assert str(word_from_pairs([(0, 1), (1, -1)])) == "aB"

    @given(words_text)
    @settings(max_examples=100)
    def test_word_times_inverse_is_identity(self, text):
        word = Word.parse(text)
        assert len(word * word.inverse()) == 0

    @given(words_text)
    @settings(max_examples=100)
    def test_reduced_is_idempotent(self, text):
        reduced = Word.parse(text).reduced()
        assert reduced.is_reduced
        assert reduced.reduced() == reduced
        assert reduced.cyclically_reduced().is_cyclically_reduced


class TestEnumeration:
    def test_one_generator(self):
        assert [str(w) for w in enumerate_words(1, 2)] == ["e", "a", "A", "aa", "AA"]

    @pytest.mark.parametrize("n, length", [(1, 3), (2, 1), (2, 3), (3, 2)])
    def test_counts_match_formula(self, n, length):
        words = [w for w in enumerate_words(n, length) if len(w) == length]
        assert len(words) == count_reduced_words(n, length)
        assert all(w.is_reduced for w in words)

    @pytest.mark.parametrize("length, expected", [(2, 12), (3, 28), (4, 84)])
    def test_cyclically_reduced_counts(self, length, expected):
        words = enumerate_words(2, length, WordMode.CYCLICALLY_REDUCED)
        assert sum(1 for w in words if len(w) == length) == expected

    def test_shortest_first(self):
        lengths = [len(w) for w in enumerate_words(2, 3)]
        assert lengths == sorted(lengths)

    def test_negative_length(self):
        with pytest.raises(ValueError):
            list(enumerate_words(2, -1))

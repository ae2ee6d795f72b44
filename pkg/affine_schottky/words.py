"""
Words in the Free Group
Letters g_i^{+1} / g_i^{-1}, reduced products, cyclic reduction and the
lexicographic enumeration used by the product audit.

Generator indices are 0-based; renderings use "a", "b", ... for g_i and
the upper-case letter for g_i^{-1}.
"""

from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, List, Literal, Sequence, Tuple

Sign = Literal[-1, 1]


@dataclass(frozen=True, order=True)
class Letter:
    index: int
    sign: Sign

    def __post_init__(self):
        if self.index < 0 or self.index >= 26:
            raise ValueError(f"letter index must lie in 0..25, got {self.index}")
        if self.sign not in (1, -1):
            raise ValueError(f"letter sign must be +1 or -1, got {self.sign}")

    def inverse(self) -> "Letter":
        return Letter(self.index, -self.sign)

    def __str__(self) -> str:
        char = chr(ord("a") + self.index)
        return char if self.sign == 1 else char.upper()

    @classmethod
    def parse(cls, char: str) -> "Letter":
        if len(char) != 1 or not char.isalpha():
            raise ValueError(f"not a letter: {char!r}")
        return cls(ord(char.lower()) - ord("a"), 1 if char.islower() else -1)


@dataclass(frozen=True)
class Word:
    letters: Tuple[Letter, ...] = ()

    @classmethod
    def parse(cls, text: str) -> "Word":
        return cls(tuple(Letter.parse(c) for c in text))

    @classmethod
    def identity(cls) -> "Word":
        return cls()

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self) -> Iterator[Letter]:
        return iter(self.letters)

    def __str__(self) -> str:
        return "".join(str(letter) for letter in self.letters) or "e"

    @property
    def is_reduced(self) -> bool:
        return all(b != a.inverse() for a, b in zip(self.letters, self.letters[1:]))

    @property
    def is_cyclically_reduced(self) -> bool:
        if not self.is_reduced:
            return False
        return len(self) < 2 or self.letters[-1] != self.letters[0].inverse()

    def reduced(self) -> "Word":
        stack: List[Letter] = []
        for letter in self.letters:
            if stack and stack[-1] == letter.inverse():
                stack.pop()
            else:
                stack.append(letter)
        return Word(tuple(stack))

    def cyclically_reduced(self) -> "Word":
        """Conjugate of the reduced word with no cancellation between its ends."""
        letters = list(self.reduced().letters)
        while len(letters) >= 2 and letters[-1] == letters[0].inverse():
            letters = letters[1:-1]
        return Word(tuple(letters))

    def inverse(self) -> "Word":
        return Word(tuple(letter.inverse() for letter in reversed(self.letters)))

    def __mul__(self, other: "Word") -> "Word":
        return Word(self.letters + other.letters).reduced()

    def __pow__(self, n: int) -> "Word":
        if n < 0:
            return self.inverse() ** -n
        result = Word()
        for _ in range(n):
            result = result * self
        return result


class WordMode(Enum):
    REDUCED = "reduced"
    CYCLICALLY_REDUCED = "cyclically_reduced"


def alphabet(n: int) -> List[Letter]:
    """a, A, b, B, ... for n generators."""
    return [Letter(i, s) for i in range(n) for s in (1, -1)]


def enumerate_words(n: int, max_len: int, mode: WordMode = WordMode.REDUCED) -> Iterator[Word]:
    """
    Reduced (or cyclically reduced) words of length <= max_len, shortest first
    and lexicographic within a length. The empty word is yielded once.
    """
    if max_len < 0:
        raise ValueError(f"max_len must be >= 0, got {max_len}")
    letters = alphabet(n)
    queue = deque([Word()])
    while queue:
        word = queue.popleft()
        if mode is WordMode.REDUCED or word.is_cyclically_reduced:
            yield word
        if len(word) == max_len:
            continue
        for letter in letters:
            if word.letters and letter == word.letters[-1].inverse():
                continue
            queue.append(Word(word.letters + (letter,)))


def count_reduced_words(n: int, length: int) -> int:
    """2n (2n-1)^(k-1) reduced words of length k >= 1."""
    if length == 0:
        return 1
    return 2 * n * (2 * n - 1) ** (length - 1)


def word_from_pairs(pairs: Sequence[Tuple[int, int]]) -> Word:
    return Word(tuple(Letter(i, s) for i, s in pairs))

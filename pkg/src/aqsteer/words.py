"""Letters, words and the almost-quantum word set.

A letter ``a|x@k`` stands for the projector of party ``k`` (1-based) onto
outcome ``a`` of measurement ``x``.  Words are products of letters, reduced
with three rewrite rules: the empty word is a unit, a letter is idempotent,
and letters of different parties commute.  Within one party the letter order
is kept, since those projectors need not commute.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence, Union

from .errors import InvalidInputError, ScenarioTooLargeError

DEFAULT_WORD_CAP = 20_000

Cardinality = Union[int, Sequence[int]]


@dataclass(frozen=True)
class Scenario:
    """Black-box parties with their input/output cardinalities, plus Bob's dimension.

    ``n_inputs`` and ``n_outputs`` are normally shared by all parties.  A
    per-party tuple is also accepted; it is used when a trusted party's
    measurements are appended as one more Bell party.
    """

    n_parties: int
    n_inputs: Cardinality
    n_outputs: Cardinality
    bob_dim: int = 1
    inputs: tuple = field(init=False, repr=False, compare=False)
    outputs: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.n_parties) < 1:
            raise InvalidInputError("a scenario needs at least one party")
        n = int(self.n_parties)
        ins = _per_party(self.n_inputs, n, "n_inputs")
        outs = _per_party(self.n_outputs, n, "n_outputs")
        if min(ins) < 1:
            raise InvalidInputError("every party needs at least one input")
        if min(outs) < 1:
            raise InvalidInputError("every measurement needs at least one outcome")
        if int(self.bob_dim) < 1:
            raise InvalidInputError("bob_dim must be positive")
        object.__setattr__(self, "n_parties", n)
        object.__setattr__(self, "inputs", ins)
        object.__setattr__(self, "outputs", outs)
        # keep uniform scenarios in their scalar form so equality and json stay simple
        object.__setattr__(self, "n_inputs", ins[0] if len(set(ins)) == 1 else ins)
        object.__setattr__(self, "n_outputs", outs[0] if len(set(outs)) == 1 else outs)
        object.__setattr__(self, "bob_dim", int(self.bob_dim))

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return (self.n_parties, self.inputs, self.outputs, self.bob_dim) == (
            other.n_parties, other.inputs, other.outputs, other.bob_dim)

    def __hash__(self):
        return hash((self.n_parties, self.inputs, self.outputs, self.bob_dim))

    @property
    def is_uniform(self) -> bool:
        return len(set(self.inputs)) == 1 and len(set(self.outputs)) == 1

    @property
    def n_aq_words(self) -> int:
        return math.prod(1 + a * x for a, x in zip(self.outputs, self.inputs))

    def with_party(self, n_inputs: int, n_outputs: int, bob_dim: int = 1) -> "Scenario":
        """Scenario with one more party appended last."""
        return Scenario(self.n_parties + 1, self.inputs + (n_inputs,),
                        self.outputs + (n_outputs,), bob_dim)

    def to_json(self) -> dict:
        return {
            "n_parties": self.n_parties,
            "n_inputs": self.n_inputs if isinstance(self.n_inputs, int) else list(self.n_inputs),
            "n_outputs": self.n_outputs if isinstance(self.n_outputs, int) else list(self.n_outputs),
            "bob_dim": self.bob_dim,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Scenario":
        try:
            return cls(obj["n_parties"], obj["n_inputs"], obj["n_outputs"], obj.get("bob_dim", 1))
        except KeyError as exc:
            raise InvalidInputError(f"scenario: missing field {exc.args[0]!r}") from None


def _per_party(value, n, name) -> tuple:
    if isinstance(value, (int,)) or hasattr(value, "__index__"):
        return (int(value),) * n
    values = tuple(int(v) for v in value)
    if len(values) != n:
        raise InvalidInputError(f"{name}: expected {n} entries, got {len(values)}")
    return values


class Letter(NamedTuple):
    party: int   # 1-based
    input: int
    output: int

    def __str__(self):
        return f"{self.output}|{self.input}@{self.party}"


@dataclass(frozen=True, order=True)
class Word:
    letters: tuple = ()

    def __len__(self):
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)

    def __str__(self):
        if not self.letters:
            return EMPTY_SYMBOL
        return " . ".join(str(l) for l in self.letters)

    @property
    def parties(self) -> tuple:
        return tuple(l.party for l in self.letters)

    def dagger(self) -> "Word":
        """Reverse the letter order and renormalise."""
        return Word(_normal_form(tuple(reversed(self.letters))))

    def __add__(self, other: "Word") -> "Word":
        return Word(_normal_form(self.letters + tuple(other.letters)))


EMPTY_SYMBOL = "∅"
EMPTY = Word(())


class _Null:
    """Marker for products that vanish because of orthogonal outcomes."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NULL"

    def __reduce__(self):
        return (_Null, ())


NULL = _Null()


def _normal_form(letters: tuple) -> tuple:
    # stable sort keeps the order inside each party's block
    out = sorted(letters, key=lambda l: l.party)
    reduced = []
    for l in out:
        if reduced and reduced[-1] == l:
            continue
        reduced.append(l)
    return tuple(reduced)


def _check_letter(letter: Letter, scenario: Scenario) -> Letter:
    k, x, a = int(letter[0]), int(letter[1]), int(letter[2])
    if not 1 <= k <= scenario.n_parties:
        raise InvalidInputError(f"letter {letter!r}: party out of range 1..{scenario.n_parties}")
    if not 0 <= x < scenario.inputs[k - 1]:
        raise InvalidInputError(f"letter {letter!r}: input out of range")
    if not 0 <= a < scenario.outputs[k - 1]:
        raise InvalidInputError(f"letter {letter!r}: output out of range")
    return Letter(k, x, a)


def canonicalize(raw: Iterable, scenario: Scenario) -> Word:
    """Normal form of a letter sequence under the symmetry operations.

    Letters may be ``Letter`` instances or ``(party, input, output)`` triples.
    """
    letters = tuple(_check_letter(l, scenario) for l in raw)
    return Word(_normal_form(letters))


def is_null(word: Word) -> bool:
    """True when some letter is followed by a letter of the same party and
    input but a different outcome."""
    letters = word.letters
    for left, right in zip(letters, letters[1:]):
        if left.party == right.party and left.input == right.input and left.output != right.output:
            return True
    return False


def product_key(v: Word, w: Word):
    """Canonical form of ``v† w``, or ``NULL`` if the product vanishes."""
    letters = tuple(reversed(v.letters)) + tuple(w.letters)
    # words built from two S_AQ members settle in one pass; the bound only guards odd input
    for _ in range(max(1, len(letters) ** 2)):
        nxt = _normal_form(letters)
        if nxt == letters:
            break
        letters = nxt
    word = Word(letters)
    return NULL if is_null(word) else word


def dagger_key(key):
    return key if key is NULL else key.dagger()


def generate_aq_words(scenario: Scenario, cap: int = DEFAULT_WORD_CAP) -> list:
    """The word set S_AQ: at most one letter per party, empty word first."""
    size = scenario.n_aq_words
    if size > cap:
        raise ScenarioTooLargeError(f"|S_AQ| = {size} exceeds the cap of {cap}")
    words = []
    parties = range(1, scenario.n_parties + 1)
    for r in range(scenario.n_parties + 1):
        block = []
        for subset in itertools.combinations(parties, r):
            xs = [range(scenario.inputs[k - 1]) for k in subset]
            as_ = [range(scenario.outputs[k - 1]) for k in subset]
            for inputs in itertools.product(*xs):
                for outputs in itertools.product(*as_):
                    block.append(Word(tuple(Letter(k, x, a) for k, x, a in zip(subset, inputs, outputs))))
        block.sort(key=lambda w: (w.parties, tuple(l.input for l in w), tuple(l.output for l in w)))
        words.extend(block)
    return words


def is_aq_word(word: Word) -> bool:
    """True when ``word`` has at most one letter per party."""
    parties = word.parties
    return len(parties) == len(set(parties))


def format_word(word: Word) -> str:
    return str(word)


def parse_word(text: str, scenario: Scenario | None = None) -> Word:
    """Inverse of ``str(word)``: ``"a1|x1@k1 . a2|x2@k2"`` or ``"∅"``."""
    text = text.strip()
    if text in (EMPTY_SYMBOL, ""):
        return EMPTY
    letters = []
    for chunk in text.split("."):
        chunk = chunk.strip()
        try:
            ax, k = chunk.split("@")
            a, x = ax.split("|")
            letters.append(Letter(int(k), int(x), int(a)))
        except ValueError:
            raise InvalidInputError(f"cannot parse letter {chunk!r} in word {text!r}") from None
    if scenario is not None:
        return canonicalize(letters, scenario)
    return Word(_normal_form(tuple(letters)))

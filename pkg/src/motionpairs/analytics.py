"""Caption content statistics: part-of-speech profiles and noun-set uniqueness.

Tagging is lexicon lookup, not a statistical tagger. Template captions can
also be tagged straight from their slot record, where every slot's part of
speech is known by construction; both routes agree on template captions.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .captions import CaptionSlots, MotionCaption

PROFILED = {"NOUN": "noun", "ADJ": "adjective", "VERB": "verb", "ADV": "adverb", "ADP": "adposition"}
_TOKEN_RE = re.compile(r"[a-z0-9]+(?:[-'][a-z0-9]+)*|[^\sa-z0-9]")


@dataclass(frozen=True)
class PosProfile:
    noun: float
    adjective: float
    verb: float
    adverb: float
    adposition: float
    other: float
    num_captions: int

    def to_dict(self) -> dict:
        return asdict(self)


class TagLexicon:
    def __init__(self, entries: dict[str, tuple[str, str]]):
        self.entries = dict(entries)  # surface form -> (tag, lemma)
        self.max_words = max((len(k.split()) for k in self.entries), default=1)

    @classmethod
    def load(cls, path: str | Path | None = None, objects: Iterable[str] = ()) -> "TagLexicon":
        if path is None:
            text = resources.files("motionpairs").joinpath("data/pos_lexicon.tsv").read_text("utf-8")
        else:
            text = Path(path).read_text("utf-8")
        entries = {}
        for line in text.splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            word, tag = parts[0].strip().lower(), parts[1].strip()
            lemma = parts[2].strip() if len(parts) > 2 else word
            entries[word] = (tag, lemma)
        lex = cls(entries)
        return lex.with_objects(objects)

    def with_objects(self, names: Iterable[str]) -> "TagLexicon":
        """Register object names (possibly multiword) as single nouns."""
        entries = dict(self.entries)
        for n in names:
            entries.setdefault(n.lower(), ("NOUN", n.lower()))
        return TagLexicon(entries)

    def lookup(self, word: str) -> tuple[str, str]:
        if word in self.entries:
            return self.entries[word]
        for suffix in ("es", "s"):  # plural fallback for lexicon nouns
            stem = word[: -len(suffix)]
            if word.endswith(suffix) and self.entries.get(stem, ("",))[0] == "NOUN":
                return "NOUN", self.entries[stem][1]
        return "UNKNOWN", word

    def tag(self, caption: str) -> list[tuple[str, str, str]]:
        """``(surface, tag, lemma)`` triples, longest multiword match first."""
        tokens = _TOKEN_RE.findall(caption.lower())
        out = []
        i = 0
        while i < len(tokens):
            for n in range(min(self.max_words, len(tokens) - i), 0, -1):
                surface = " ".join(tokens[i:i + n])
                if n == 1 or surface in self.entries:
                    tag, lemma = self.lookup(surface)
                    out.append((surface, tag, lemma))
                    i += n
                    break
        return out


_DEFAULT: TagLexicon | None = None


def default_tag_lexicon() -> TagLexicon:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = TagLexicon.load()
    return _DEFAULT


def slot_tag_counts(slots: CaptionSlots) -> Counter:
    """Tag counts of a template caption derived from its slots alone."""
    c = Counter({"NOUN": 1, "ADP": 1, "DET": 2, "X": 1})  # A <object> in the <position>
    if slots.size:
        c["ADJ"] += 1
    moving = [s for s in slots.segments if not s.empty]
    if len(slots.segments) > 1 and moving:
        c["ADV"] += 1  # first
        c["ADP"] += len(slots.segments) - 1  # before
        c["PRON"] += len(slots.segments) - 1  # it
        c["PUNCT"] += len(slots.segments) - 1
    for s in slots.segments if moving else []:
        if s.empty:
            c["VERB"] += 1  # pauses
        if s.translated:
            c["VERB"] += 1
            c["X"] += 1
            c["ADV"] += bool(s.speed) + s.diagonal + bool(s.distance)
        if s.rotated:
            c["SCONJ"] += 1
            c["VERB"] += 1
            c["X"] += 1
            c["ADV"] += bool(s.rot_amount)
    return c


def _counts(item, lexicon: TagLexicon, use_slots: bool) -> tuple[Counter, set]:
    if use_slots and isinstance(item, MotionCaption):
        return slot_tag_counts(item.slots), {item.slots.object.lower()}
    text = item.rendered if isinstance(item, MotionCaption) else item
    tags = lexicon.tag(text)
    return Counter(t for _, t, _ in tags), {lemma for _, t, lemma in tags if t == "NOUN"}


def pos_counts(caption: str, lexicon: TagLexicon | None = None) -> dict[str, int]:
    c, _ = _counts(caption, lexicon or default_tag_lexicon(), False)
    return {name: c.get(tag, 0) for tag, name in PROFILED.items()}


def _clean(captions: Sequence) -> list:
    kept = [c for c in captions if (c.rendered if isinstance(c, MotionCaption) else c).strip()]
    if not kept:
        raise ValueError("need at least one non-empty caption")
    return kept


def pos_profile(captions: Sequence[str | MotionCaption], lexicon: TagLexicon | None = None,
                use_slots: bool = True) -> PosProfile:
    """Average counts per caption of nouns, adjectives, verbs, adverbs and adpositions.

    Template captions given as :class:`MotionCaption` are tagged through their
    slots when ``use_slots`` is set.
    """
    lexicon = lexicon or default_tag_lexicon()
    captions = _clean(captions)
    total = Counter()
    for item in captions:
        total.update(_counts(item, lexicon, use_slots)[0])
    n = len(captions)
    other = sum(v for k, v in total.items() if k not in PROFILED)
    return PosProfile(*(total[t] / n for t in PROFILED), other=other / n, num_captions=n)


def noun_sets(captions: Sequence[str | MotionCaption], lexicon: TagLexicon | None = None,
              use_slots: bool = True) -> list[frozenset]:
    lexicon = lexicon or default_tag_lexicon()
    return [frozenset(_counts(c, lexicon, use_slots)[1]) for c in _clean(captions)]


def noun_uniqueness(captions: Sequence[str | MotionCaption], lexicon: TagLexicon | None = None,
                    use_slots: bool = True) -> float:
    """Fraction of captions whose set of noun lemmas occurs exactly once in the corpus."""
    sets = noun_sets(captions, lexicon, use_slots)
    freq = Counter(sets)
    return sum(freq[s] == 1 for s in sets) / len(sets)

"""Builds a small WordNet-3.0-format ``dict`` directory for tests.

The records follow the real data-file grammar: license header lines
prefixed with two spaces, byte-offset synset ids that match the actual
file positions, hex word counts, pointer blocks with mirror ``~``
pointers, verb frame blocks, and glosses terminated by two trailing
spaces. Only the vocabulary is synthetic (a small animal/motion corpus).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

HEADER = (
    "  1 This file is a miniature corpus in the WordNet 3.0 database format.\n"
    "  2 It exists so the parser can be exercised without the full corpus.\n"
    "  3 Lines whose first two characters are spaces form the license header\n"
    "  4 block and carry no synset records.\n"
)

_POS_LETTER = {"noun": "n", "verb": "v"}


@dataclass
class Rec:
    key: str
    pos: str
    lemmas: list[str]
    gloss: str
    hypernyms: list[str] = field(default_factory=list)
    instance_hypernyms: list[str] = field(default_factory=list)
    lex_filenum: int = 3
    frames: list[tuple[int, int]] = field(default_factory=list)
    offset: int = 0


NOUNS = [
    Rec("entity", "noun", ["entity"],
        "that which is perceived or known or inferred to have its own distinct existence (living or nonliving)"),
    Rec("physical_entity", "noun", ["physical_entity"],
        "an entity that has physical existence", ["entity"]),
    Rec("object", "noun", ["object", "physical_object"],
        'a tangible and visible entity; an entity that can cast a shadow; '
        '"it was full of rackets, balls and other objects"',
        ["physical_entity"]),
    Rec("whole", "noun", ["whole", "unit"],
        "an assemblage of parts that is regarded as a single entity", ["object"]),
    Rec("living_thing", "noun", ["living_thing", "animate_thing"],
        "a living (or once living) entity", ["whole"]),
    Rec("organism", "noun", ["organism", "being"],
        "a living thing that has (or can develop) the ability to act or function independently",
        ["living_thing"]),
    Rec("animal", "noun", ["animal", "animate_being", "beast", "brute", "creature", "fauna"],
        "a living organism characterized by voluntary movement", ["organism"]),
    Rec("chordate", "noun", ["chordate"],
        "any animal of the phylum Chordata having a notochord or spinal column", ["animal"]),
    Rec("vertebrate", "noun", ["vertebrate", "craniate"],
        "animals having a bony or cartilaginous skeleton with a segmented spinal column",
        ["chordate"]),
    Rec("mammal", "noun", ["mammal", "mammalian"],
        "any warm-blooded vertebrate having the skin more or less covered with hair", ["vertebrate"]),
    Rec("placental", "noun", ["placental", "placental_mammal", "eutherian"],
        "mammals having a placenta; all mammals except monotremes and marsupials", ["mammal"]),
    Rec("carnivore", "noun", ["carnivore"],
        "a terrestrial or aquatic flesh-eating mammal", ["placental"]),
    Rec("feline", "noun", ["feline", "felid"],
        "any of various lithe-bodied roundheaded fissiped mammals, many with retractile claws",
        ["carnivore"]),
    Rec("big_cat", "noun", ["big_cat", "cat"],
        "any of several large cats typically able to roar and living in the wild", ["feline"]),
    Rec("tiger", "noun", ["tiger", "Panthera_tigris"],
        "large feline of forests in most of Asia having a tawny coat with black stripes",
        ["big_cat"]),
    Rec("lion", "noun", ["lion", "king_of_beasts", "Panthera_leo"],
        'large gregarious predatory feline of Africa and southern Asia having a tawny coat with '
        'a shaggy mane in the male; "the lion is the king of beasts"',
        ["big_cat"]),
    Rec("cat", "noun", ["cat", "true_cat"],
        "feline mammal usually having thick soft fur and no ability to roar: domestic cats; wildcats",
        ["feline"]),
    Rec("domestic_animal", "noun", ["domestic_animal", "domesticated_animal"],
        "any of various animals that have been tamed and made fit for a human environment",
        ["animal"]),
    Rec("domestic_cat", "noun", ["domestic_cat", "house_cat", "Felis_domesticus", "Felis_catus"],
        "any domesticated member of the genus Felis", ["cat", "domestic_animal"]),
    Rec("wildcat", "noun", ["wildcat"],
        "any small or medium-sized cat resembling the domestic cat and living in the wild", ["cat"]),
    Rec("kitten", "noun", ["kitten", "kitty"],
        'young domestic cat; "the kitten chased its tail"', ["domestic_cat"]),
    Rec("location", "noun", ["location"],
        "a point or extent in space", ["object"]),
    Rec("region", "noun", ["region"],
        "a large indefinite location on the surface of the Earth", ["location"]),
    Rec("continent", "noun", ["continent"],
        "one of the large landmasses of the earth", ["region"]),
    Rec("asia", "noun", ["Asia"],
        "the largest continent with 60% of the earth's population",
        instance_hypernyms=["continent"]),
]

VERBS = [
    Rec("travel", "verb", ["travel", "go", "move", "locomote"],
        'change location; move, travel, or proceed; "How fast does your new car go?"',
        lex_filenum=38, frames=[(1, 0), (2, 0)]),
    Rec("walk", "verb", ["walk"],
        'use one\'s feet to advance; advance by steps; "Walk, don\'t run!"',
        ["travel"], lex_filenum=38, frames=[(1, 0), (2, 0)]),
    Rec("run", "verb", ["run"],
        "move fast by using one's feet, with one foot off the ground at any given time",
        ["travel"], lex_filenum=38, frames=[(1, 0), (2, 0)]),
    Rec("sprint", "verb", ["sprint"],
        'run very fast, usually for a short distance; "the runner sprinted for the finish line"',
        ["run"], lex_filenum=38, frames=[(2, 0)]),
    Rec("stroll", "verb", ["stroll", "saunter"],
        "walk leisurely and with no apparent aim", ["walk"], lex_filenum=38, frames=[(1, 0), (2, 0)]),
    Rec("march", "verb", ["march"],
        'march in a procession; "the veterans marched to the memorial"',
        ["walk"], lex_filenum=38, frames=[(1, 0), (2, 0)]),
]


@dataclass
class FixtureInfo:
    dict_dir: Path
    ids: dict[str, str]                     # symbolic key -> synset id
    record_counts: dict[str, int]           # pos -> record count
    hypernym_edges: set[tuple[str, str]]    # symbolic (child, parent), '@' only
    instance_edges: set[tuple[str, str]]    # symbolic (child, parent), '@i' only

    def id_of(self, key: str) -> str:
        return self.ids[key]


def _pointers(rec: Rec, by_key: dict[str, Rec]) -> list[tuple[str, Rec]]:
    ptrs: list[tuple[str, Rec]] = []
    for parent in rec.hypernyms:
        ptrs.append(("@", by_key[parent]))
    for parent in rec.instance_hypernyms:
        ptrs.append(("@i", by_key[parent]))
    # mirror pointers from parents down to children, as in the real files
    for other in by_key.values():
        if rec.key in other.hypernyms:
            ptrs.append(("~", other))
        if rec.key in other.instance_hypernyms:
            ptrs.append(("~i", other))
    return ptrs


def _render(rec: Rec, by_key: dict[str, Rec]) -> str:
    letter = _POS_LETTER[rec.pos]
    parts = [f"{rec.offset:08d}", f"{rec.lex_filenum:02d}", letter, f"{len(rec.lemmas):02x}"]
    for lemma in rec.lemmas:
        parts.extend([lemma, "0"])
    ptrs = _pointers(rec, by_key)
    parts.append(f"{len(ptrs):03d}")
    for symbol, target in ptrs:
        parts.extend([symbol, f"{target.offset:08d}", _POS_LETTER[target.pos], "0000"])
    if rec.pos == "verb":
        parts.append(f"{len(rec.frames):02d}")
        for f_num, w_num in rec.frames:
            parts.extend(["+", f"{f_num:02d}", f"{w_num:02x}"])
    parts.extend(["|", rec.gloss])
    return " ".join(parts) + "  \n"


def _write_file(path: Path, records: list[Rec], by_key: dict[str, Rec]) -> None:
    # offsets are byte positions; pointer fields are fixed-width, so record
    # lengths computed with placeholder offsets are already final
    header_len = len(HEADER.encode("utf-8"))
    position = header_len
    for rec in records:
        rec.offset = position
        position += len(_render(rec, by_key).encode("utf-8"))
    # pointer targets changed length-neutrally; re-render with real offsets
    text = HEADER + "".join(_render(rec, by_key) for rec in records)
    path.write_bytes(text.encode("utf-8"))


def build_dict_dir(dest: Path) -> FixtureInfo:
    dest.mkdir(parents=True, exist_ok=True)
    by_key = {rec.key: rec for rec in NOUNS + VERBS}
    _write_file(dest / "data.noun", NOUNS, by_key)
    _write_file(dest / "data.verb", VERBS, by_key)
    ids = {
        rec.key: f"{rec.offset:08d}-{_POS_LETTER[rec.pos]}"
        for rec in NOUNS + VERBS
    }
    hyper = {(rec.key, p) for rec in NOUNS + VERBS for p in rec.hypernyms}
    inst = {(rec.key, p) for rec in NOUNS + VERBS for p in rec.instance_hypernyms}
    return FixtureInfo(
        dict_dir=dest,
        ids=ids,
        record_counts={"noun": len(NOUNS), "verb": len(VERBS)},
        hypernym_edges=hyper,
        instance_edges=inst,
    )

"""Static word lists used by text cleaning and the entity heuristic."""

from pathlib import Path

from sklearn.feature_extraction.text import ENGLISH_STOP_WORDS

from chronotopics.errors import CorpusError


PLACES: tuple[str, ...] = (
    "Syria",
    "Damascus",
    "Aleppo",
    "Idlib",
    "Douma",
    "Homs",
    "Raqqa",
    "Daraa",
    "Ghouta",
    "Iraq",
    "Baghdad",
    "Lebanon",
    "Beirut",
    "Jordan",
    "Israel",
    "Iran",
    "Turkey",
    "Ankara",
    "Yemen",
    "Russia",
    "Moscow",
    "Ukraine",
    "Kyiv",
    "London",
    "Paris",
    "Berlin",
    "Geneva",
    "Brussels",
    "Washington",
    "Canada",
    "China",
    "Beijing",
    "Kashmir",
    "Afghanistan",
    "Kabul",
    "Egypt",
    "Cairo",
    "Libya",
    "Tripoli",
    "Sudan",
)


def get_function_words() -> frozenset[str]:
    return frozenset(ENGLISH_STOP_WORDS)


def get_gazetteer() -> frozenset[str]:
    return frozenset(name.lower() for name in PLACES)


def load_word_list(path: str | Path) -> frozenset[str]:
    """Read one entry per line, lowercased; blank lines and `#` comments ignored."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise CorpusError(f"Cannot read word list {path}: {e}") from e
    words = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line.lower())
    return frozenset(words)

"""Word-level text handling shared by the classifier, the answer engine and the metrics."""

import re

_WORD = re.compile(r"[^\W_]+", re.UNICODE)

# Function words dropped before keyword matching. Versioned with the package:
# changing this list changes every Jaccard score.
STOPWORDS_VERSION = 1
STOPWORDS = frozenset(
    """
    a an the what which who whom whose where when why how
    is are was were be been being am do does did can could
    would should will shall may might must
    this that these those there here it its
    of in on at to for from with by about into onto as
    and or but not no
    i me my we our you your he him his she her they them their
    s some any
    """.split()
)

_UNDOUBLE_KEEP = set("lsz")
_VOWELS = set("aeiou")


def tokenize(text):
    """Lowercase and split on anything that is not a letter or digit.

    >>> tokenize("it's red.")
    ['it', 's', 'red']
    """
    return _WORD.findall(text.lower())


def _undouble(stem):
    if (
        len(stem) >= 3
        and stem[-1] == stem[-2]
        and stem[-1] not in _VOWELS
        and stem[-1] not in _UNDOUBLE_KEEP
    ):
        return stem[:-1]
    return stem


def stem(word):
    """Light suffix stripping: -ing, -ed, -es, -s.

    Only strips when at least three characters remain, and repairs doubled
    final consonants (``running`` -> ``run``).
    """
    if word.endswith("ing") and len(word) - 3 >= 3:
        return _undouble(word[:-3])
    if word.endswith("ed") and len(word) - 2 >= 3:
        return _undouble(word[:-2])
    if word.endswith(("sses", "xes", "zzes", "ches", "shes")) and len(word) - 2 >= 3:
        return word[:-2]
    if word.endswith("s") and not word.endswith(("ss", "us", "is")) and len(word) - 1 >= 3:
        return word[:-1]
    return word


def keywords(text):
    """Stopword-free, stemmed word set of ``text``."""
    return frozenset(stem(t) for t in tokenize(text) if t not in STOPWORDS)


# Plural -> singular. Every value must itself be a fixed point of ``singularize``.
IRREGULAR_PLURALS = {
    "people": "person",
    "men": "man",
    "women": "woman",
    "children": "child",
    "mice": "mouse",
    "geese": "goose",
    "teeth": "tooth",
    "feet": "foot",
    "oxen": "ox",
    "knives": "knife",
    "wives": "wife",
    "lives": "life",
    "leaves": "leaf",
    "loaves": "loaf",
    "wolves": "wolf",
    "calves": "calf",
    "halves": "half",
    "shelves": "shelf",
    "scarves": "scarf",
    "buses": "bus",
    "potatoes": "potato",
    "tomatoes": "tomato",
    "heroes": "hero",
    "cacti": "cactus",
    "fungi": "fungus",
    "dice": "die",
    "lenses": "lens",
}

# Words ending in -s that are already singular (or invariant).
SINGULAR_EXCEPTIONS = frozenset(
    """
    bus gas lens news series species means jeans pants trousers shorts
    scissors glasses clothes chess physics mathematics economics athletics
    billiards darts measles whereabouts headquarters
    sheep deer fish moose aircraft
    """.split()
)


def _strip_plural(word):
    if word in SINGULAR_EXCEPTIONS or len(word) < 4:
        return word
    if word.endswith("ies") and len(word) > 4:
        return word[:-3] + "y"
    if word.endswith(("sses", "xes", "zzes", "ches", "shes")):
        return word[:-2]
    if word.endswith("s") and not word.endswith(("ss", "us", "is")):
        return word[:-1]
    return word


def singularize(word):
    word = IRREGULAR_PLURALS.get(word, word)
    stripped = _strip_plural(word)
    return IRREGULAR_PLURALS.get(stripped, stripped)


def normalize_answer(text):
    """Lowercase, trim, collapse whitespace and singularize every word.

    >>> normalize_answer("  Traffic  Lights ")
    'traffic light'
    """
    return " ".join(singularize(w) for w in text.lower().split())

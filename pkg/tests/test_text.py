from hypothesis import given, strategies as st

from factqa.text import STOPWORDS, keywords, normalize_answer, singularize, stem, tokenize


def test_tokenize_examples():
    assert tokenize("Which animal can climb trees?") == ["which", "animal", "can", "climb", "trees"]
    assert tokenize("") == []
    assert tokenize("it's red.") == ["it", "s", "red"]
    assert tokenize("snake_case and-dash") == ["snake", "case", "and", "dash"]


def test_keywords_examples():
    assert keywords("Which animal in this image is able to climb trees?") == {
        "animal",
        "image",
        "able",
        "climb",
        "tree",
    }
    assert keywords("What is a the which?") == frozenset()


def test_stem_rules():
    assert stem("climbing") == stem("climb") == "climb"
    assert stem("running") == "run"
    assert stem("trees") == "tree"
    assert stem("boxes") == "box"
    assert stem("glass") == "glass"
    assert stem("bus") == "bus"
    assert stem("rolled") == "roll"
    assert stem("sing") == "sing"  # too short to strip


def test_stopwords_are_lowercase_single_tokens():
    assert {"what", "which", "a", "the"} <= STOPWORDS
    assert all(tokenize(w) == [w] for w in STOPWORDS)


def test_normalize_answer_examples():
    assert normalize_answer("Zebras") == "zebra"
    assert normalize_answer("sofa") == "sofa"
    assert normalize_answer("  Traffic  Lights ") == "traffic light"
    assert normalize_answer("Puppies") == "puppy"
    assert normalize_answer("people") == "person"
    assert normalize_answer("bus") == "bus"


def test_singularize_irregular_round_trip():
    assert singularize("children") == "child"
    assert singularize("mice") == "mouse"


words = st.text(alphabet="abcdefghijklmnopqrstuvwxyzSE ", max_size=30)


@given(words)
def test_normalize_answer_idempotent(text):
    once = normalize_answer(text)
    assert normalize_answer(once) == once


@given(words)
def test_keywords_have_no_stopwords_or_empties(text):
    kw = keywords(text)
    assert "" not in kw
    assert not (kw & STOPWORDS)

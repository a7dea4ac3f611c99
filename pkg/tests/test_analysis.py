import pytest
from hypothesis import given, strategies as st

from iterqe.analysis import STOPWORDS, PorterStemmer, analyze

# Input/output pairs from the published reference vocabulary of the
# original Porter algorithm.
REFERENCE_STEMS = {
    "caresses": "caress", "ponies": "poni", "ties": "ti", "caress": "caress",
    "cats": "cat", "feed": "feed", "agreed": "agre", "plastered": "plaster",
    "bled": "bled", "motoring": "motor", "sing": "sing", "conflated": "conflat",
    "troubled": "troubl", "sized": "size", "hopping": "hop", "tanned": "tan",
    "falling": "fall", "hissing": "hiss", "fizzed": "fizz", "failing": "fail",
    "filing": "file", "happy": "happi", "sky": "sky", "relational": "relat",
    "conditional": "condit", "rational": "ration", "valenci": "valenc",
    "hesitanci": "hesit", "digitizer": "digit", "radicalli": "radic",
    "differentli": "differ", "vileli": "vile", "analogousli": "analog",
    "vietnamization": "vietnam", "predication": "predic", "operator": "oper",
    "feudalism": "feudal", "decisiveness": "decis", "hopefulness": "hope",
    "callousness": "callous", "formaliti": "formal", "sensitiviti": "sensit",
    "sensibiliti": "sensibl", "triplicate": "triplic", "formative": "form",
    "formalize": "formal", "electriciti": "electr", "electrical": "electr",
    "hopeful": "hope", "goodness": "good", "revival": "reviv",
    "allowance": "allow", "inference": "infer", "airliner": "airlin",
    "gyroscopic": "gyroscop", "adjustable": "adjust", "defensible": "defens",
    "irritant": "irrit", "replacement": "replac", "adjustment": "adjust",
    "dependent": "depend", "adoption": "adopt", "communism": "commun",
    "activate": "activ", "angulariti": "angular", "homologous": "homolog",
    "effective": "effect", "bowdlerize": "bowdler", "probate": "probat",
    "rate": "rate", "cease": "ceas", "controll": "control", "roll": "roll",
    "generalization": "gener", "oscillators": "oscil",
}


@pytest.mark.parametrize("word,expected", sorted(REFERENCE_STEMS.items()))
def test_porter_reference_vocabulary(word, expected):
    assert PorterStemmer().stem(word) == expected


def test_porter_running_runs():
    stemmer = PorterStemmer()
    assert stemmer.stem("running") == "run"
    assert stemmer.stem("runs") == "run"


def test_analyze_stopwords_and_case():
    assert analyze("The Columbia River") == ["columbia", "river"]


def test_analyze_empty():
    assert analyze("") == []


def test_analyze_stemming():
    assert analyze("running runs") == ["run", "run"]


def test_analyze_splits_on_punctuation():
    assert analyze("hello,world-foo") == ["hello", "world", "foo"]


def test_analyze_drops_all_stopwords():
    assert analyze(" ".join(STOPWORDS)) == []


@given(st.text())
def test_analyze_deterministic_and_lowercase(text):
    out = analyze(text)
    assert out == analyze(text)
    for term in out:
        assert term == term.lower()
        assert term not in STOPWORDS


@given(st.text(alphabet="abcdefghijklmnopqrstuvwxyz", min_size=1, max_size=20))
def test_stemmer_never_grows_words(word):
    assert len(PorterStemmer().stem(word)) <= len(word)

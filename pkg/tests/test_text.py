import pytest

from genref.text import porter_stem, tokenize


class TestTokenize:
    def test_punctuation(self):
        assert tokenize("The kid, in blue!") == ["the", "kid", "in", "blue"]

    def test_empty(self):
        assert tokenize("") == []

    def test_whitespace_collapse(self):
        assert tokenize("Two  people   on left") == ["two", "people", "on", "left"]


# known input/output pairs of the classic Porter algorithm
PORTER_PAIRS = [
    ("caresses", "caress"),
    ("ponies", "poni"),
    ("ties", "ti"),
    ("caress", "caress"),
    ("cats", "cat"),
    ("feed", "feed"),
    ("agreed", "agre"),
    ("plastered", "plaster"),
    ("motoring", "motor"),
    ("sing", "sing"),
    ("conflated", "conflat"),
    ("hopping", "hop"),
    ("falling", "fall"),
    ("filing", "file"),
    ("happy", "happi"),
    ("sky", "sky"),
    ("relational", "relat"),
    ("conditional", "condit"),
    ("rational", "ration"),
    ("digitizer", "digit"),
    ("operator", "oper"),
    ("hopefulness", "hope"),
    ("formaliti", "formal"),
    ("triplicate", "triplic"),
    ("formative", "form"),
    ("electrical", "electr"),
    ("hopeful", "hope"),
    ("goodness", "good"),
    ("allowance", "allow"),
    ("inference", "infer"),
    ("adjustable", "adjust"),
    ("replacement", "replac"),
    ("adoption", "adopt"),
    ("activate", "activ"),
    ("effective", "effect"),
    ("probate", "probat"),
    ("rate", "rate"),
    ("cease", "ceas"),
    ("controll", "control"),
    ("roll", "roll"),
    ("boxes", "box"),
    ("running", "run"),
    ("left", "left"),
]


@pytest.mark.parametrize("word,stem", PORTER_PAIRS)
def test_porter(word, stem):
    assert porter_stem(word) == stem


def test_short_words_untouched():
    assert porter_stem("a") == "a"
    assert porter_stem("on") == "on"

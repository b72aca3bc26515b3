"""Sentence splitting and word tokenization."""

import re

ABBREVIATIONS = frozenset(
    {
        "dr.", "mr.", "mrs.", "ms.", "prof.", "st.", "jr.", "sr.",
        "e.g.", "i.e.", "vs.", "approx.", "fig.", "no.", "inc.", "dept.",
    }
)

# one or more terminal marks, optionally followed by closing quotes/brackets
_TERMINAL = re.compile(r"[.!?]+[\"')\]]*(?=\s|$)")
_TOKEN = re.compile(r"[^\W_]+(?:[-'][^\W_]+)*|[^\w\s]|_")


def _ends_with_abbreviation(text, end):
    start = end
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    return text[start:end].lower() in ABBREVIATIONS


def split_sentences(text):
    """Split ``text`` into sentences.

    A sentence ends at ``.``, ``!`` or ``?`` followed by whitespace or the
    end of text, and at every newline. A period closing a known
    abbreviation (``ABBREVIATIONS``) does not end a sentence. Returned
    sentences are stripped and never empty.
    """
    sentences = []
    for line in text.splitlines():
        start = 0
        for match in _TERMINAL.finditer(line):
            end = match.end()
            if match.group().rstrip("\"')]") == "." and _ends_with_abbreviation(line, end):
                continue
            piece = line[start:end].strip()
            if piece:
                sentences.append(piece)
            start = end
        piece = line[start:].strip()
        if piece:
            sentences.append(piece)
    return sentences


def tokenize(sentence):
    """Lowercase and split into word and punctuation tokens.

    Internal hyphens and apostrophes stay inside a word (``blood-sugar``,
    ``don't``); every other non-alphanumeric character is its own token.

    >>> tokenize("Type 2 diabetes (T2D)?")
    ['type', '2', 'diabetes', '(', 't2d', ')', '?']
    """
    return _TOKEN.findall(sentence.lower())

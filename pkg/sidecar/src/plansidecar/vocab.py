"""Word-level vocabulary for the tiny student model."""

from __future__ import annotations

import json
import re
from pathlib import Path

_TOKEN = re.compile(r"[a-z0-9]+|[^\sa-z0-9]")

PAD = "<pad>"
UNK = "<unk>"
BOS = "<bos>"
EOL = "<eol>"  # end of a step line
EOP = "<eop>"  # end of the whole plan
SPECIALS = (PAD, UNK, BOS, EOL, EOP)

# Small default word list so a fresh builtin model can tokenize household
# style text; unseen words map to <unk>.
_DEFAULT_WORDS = (
    "the a an and or to of in on with for at from into out up down "
    "go walk grab take put open close turn switch plug fill pour wash clean "
    "find look make get set start stop wait buy use step goal plan first "
    "then next finally water coffee tea milk cup bowl plate table chair sofa "
    "tv light door window fridge sink oven book bag phone car dog cat plant "
    "one two three four five six seven eight nine ten"
).split()


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


class Vocab:
    def __init__(self, words: list[str] | None = None):
        words = list(dict.fromkeys(words if words is not None else _DEFAULT_WORDS))
        self.tokens = list(SPECIALS) + [w for w in words if w not in SPECIALS]
        self.index = {token: i for i, token in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def pad(self) -> int:
        return self.index[PAD]

    @property
    def unk(self) -> int:
        return self.index[UNK]

    @property
    def bos(self) -> int:
        return self.index[BOS]

    @property
    def eol(self) -> int:
        return self.index[EOL]

    @property
    def eop(self) -> int:
        return self.index[EOP]

    def encode_words(self, text: str) -> list[int]:
        return [self.index.get(token, self.unk) for token in tokenize(text)]

    def decode_words(self, ids: list[int]) -> str:
        return " ".join(self.tokens[i] for i in ids if self.tokens[i] not in SPECIALS)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.tokens), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocab":
        tokens = json.loads(Path(path).read_text(encoding="utf-8"))
        vocab = cls([])
        vocab.tokens = tokens
        vocab.index = {token: i for i, token in enumerate(tokens)}
        return vocab

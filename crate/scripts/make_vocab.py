#!/usr/bin/env python3
"""Train the bundled byte-level BPE vocabulary and freeze reference encodings.

Writes data/vocab.json, data/merges.txt, data/specials.json and
crates/core/tests/fixtures/bpe_reference.json. The reference encodings are
computed with the pure-Python GPT-2 tokenizer from `transformers`, which is
independent of the Rust implementation they are checked against.
"""
import json
import os

from tokenizers import ByteLevelBPETokenizer
from transformers import GPT2Tokenizer

texts = []
for line in open("data/stories.jsonl"):
    rec = json.loads(line)
    texts.append(" ".join(rec["sentences"]))
    if "title" in rec:
        texts.append(rec["title"])
lexicon = json.load(open("data/lexicon.json"))

tok = ByteLevelBPETokenizer(add_prefix_space=False)
tok.train_from_iterator(texts, vocab_size=1400, min_frequency=2, show_progress=False)
os.makedirs("data", exist_ok=True)
tok.save_model("data")

vocab = json.load(open("data/vocab.json"))
base = len(vocab)
specials = {}
for i, name in enumerate(["[blank]", "[sep]", "[eos]", "[no_frame]"]):
    specials[name] = base + i
for frame in lexicon["frames"]:
    specials["[" + frame["name"] + "]"] = base + len(specials)
with open("data/specials.json", "w") as f:
    json.dump(specials, f, indent=1)
    f.write("\n")

reference = GPT2Tokenizer("data/vocab.json", "data/merges.txt")
fixtures = [
    "He bought fruit.",
    " realize",
    "realize",
    " Realize",
    " in cahoots",
    " vamoose",
    "Charles went shopping.",
    "Alec's daughter wanted more blocks to play with.",
    "The next weekend, I was asked to please stay home.",
    "Ari spends $20 a day on pickles.",
    "  two  spaces\tand\ttabs\n",
    "She'll say they've done it, I'm sure we'd agree.",
    "numbers 12345 and 3.14159!",
    "café naïve résumé",
    "emoji \U0001F600 and symbols ☃",
    " broil broiled broiling",
    "UPPER lower MiXeD",
    "   leading and trailing   ",
    "punctuation!!! ... ??? ---",
    "Then he left. He cooked the fruit for his mother.",
]
cases = [{"text": t, "ids": reference.encode(t)} for t in fixtures]
os.makedirs("crates/core/tests/fixtures", exist_ok=True)
with open("crates/core/tests/fixtures/bpe_reference.json", "w") as f:
    json.dump(cases, f, indent=1, ensure_ascii=False)
    f.write("\n")
print("base vocab", base, "specials", len(specials))
for c in cases[:6]:
    print(c)

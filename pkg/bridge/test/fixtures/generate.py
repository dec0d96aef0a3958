"""Regenerate the bridge smoke-test fixtures from the engine.

Run from the repository root with the kbplugin package installed:

    python3 bridge/test/fixtures/generate.py

Outputs (committed): augmented.jsonl, corpus_kb1.jsonl, corpus_kb2.jsonl.
They correspond to `kbplugin augment --kb tests/fixtures/toy_music.json
--n 2 --seed 1` over 50 decoder-grown gold programs, followed by
`kbplugin schema-data -K 500` on each generated KB variant.
"""

import json
import random
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parents[3]
FIXTURES = Path(__file__).resolve().parent
sys.path.insert(0, str(ROOT / "tests"))

from conftest import grow_random_program  # noqa: E402

from kbplugin import decoder as dec  # noqa: E402
from kbplugin.kb import load_kb  # noqa: E402

PHRASES = {
    "Find": "{arg}",
    "FindAll": "everything",
    "Relate": "{arg} of",
    "ReverseRelate": "things whose {arg} is",
    "FilterConcept": "only the {arg} among",
    "And": "both",
    "Or": "either",
    "Argmax": "highest {arg} of",
    "Argmin": "lowest {arg} of",
    "LT": "less {arg} than",
    "LE": "at most {arg} of",
    "GT": "more {arg} than",
    "GE": "at least {arg} of",
    "Count": "number of",
}

# questions talk about schema items in words that match no KB variant's
# surface forms, the way natural questions do; the argument wording must
# come from whichever schema plugin is active
SCHEMA_PARAPHRASE = {
    "r_member": "lineup",
    "r_role": "duty",
    "c_band": "ensemble",
    "c_person": "folks",
    "c_instrument": "gear",
    "c_membership": "tenure",
}


def verbalize(kb, program) -> str:
    from kbplugin.kopl import ARG_CONCEPT, ARG_RELATION, SIGNATURES

    words = []
    for call in reversed(program.calls):
        arg = call.arg or ""
        sig = SIGNATURES[call.function]
        if sig in (ARG_CONCEPT, ARG_RELATION):
            resolve = kb.resolve_concept if sig == ARG_CONCEPT else kb.resolve_relation
            item_id = sorted(resolve(arg))[0]
            arg = SCHEMA_PARAPHRASE[item_id]
        words.append(PHRASES[call.function].format(arg=arg))
    return " ".join(words)


def main():
    kb = load_kb(ROOT / "tests" / "fixtures" / "toy_music.json")
    topics = dec.TopicSpec(("Beatles", "Paul Mccartney", "John Lennon"), ())
    rng = random.Random(2024)
    records, seen = [], set()
    while len(records) < 50:
        program = grow_random_program(kb, topics, rng)
        text = program.text()
        question = verbalize(kb, program)
        if (question, text) in seen:
            continue
        seen.add((question, text))
        records.append({"question": question, "program": text})

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        pairs = tmp / "pairs.jsonl"
        pairs.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in records))
        out = tmp / "gen"
        cli = [sys.executable, "-m", "kbplugin.cli"]
        subprocess.run(cli + [
            "augment", "--kb", str(ROOT / "tests/fixtures/toy_music.json"),
            "--data", str(pairs), "--n", "2", "--seed", "1", "--out", str(out),
        ], check=True, stdout=subprocess.DEVNULL)
        for i, name in ((1, "corpus_kb1.jsonl"), (2, "corpus_kb2.jsonl")):
            subprocess.run(cli + [
                "schema-data", "--kb", str(out / f"kb_{i:03d}.json"),
                "-K", "500", "--out", str(tmp / name),
            ], check=True, stdout=subprocess.DEVNULL)
            shutil.copy(tmp / name, FIXTURES / name)
        shutil.copy(out / "augmented.jsonl", FIXTURES / "augmented.jsonl")
    print("fixtures written to", FIXTURES)


if __name__ == "__main__":
    main()

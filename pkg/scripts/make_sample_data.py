#!/usr/bin/env python3
"""Generate a small deterministic de-en demo corpus under a work directory.

Writes a selection pool, a test set, monolingual files and a document
corpus, all synthetic but shaped like the real inputs, so the experiment
demos and the CLI walkthrough run without any external data.
"""

import argparse
import json
import random
from pathlib import Path

ADJ_DE = ["kleine", "alte", "rote", "schnelle", "leise", "neue", "warme", "kalte"]
ADJ_EN = ["small", "old", "red", "fast", "quiet", "new", "warm", "cold"]
NOUN_DE = ["Katze", "Stadt", "Brücke", "Zeitung", "Insel", "Lampe", "Straße", "Uhr"]
NOUN_EN = ["cat", "city", "bridge", "newspaper", "island", "lamp", "street", "clock"]
VERB_DE = ["sieht", "findet", "sucht", "kennt", "zeigt", "hört", "malt", "trägt"]
VERB_EN = ["sees", "finds", "seeks", "knows", "shows", "hears", "paints", "carries"]


def sentence_pair(rng: random.Random, idx: int) -> tuple[str, str]:
    a, n, v = rng.randrange(8), rng.randrange(8), rng.randrange(8)
    b, m = rng.randrange(8), rng.randrange(8)
    de = (
        f"satz{idx:03d} die {ADJ_DE[a]} {NOUN_DE[n]} {VERB_DE[v]} "
        f"die {ADJ_DE[b]} {NOUN_DE[m]} am Morgen"
    )
    en = (
        f"sent{idx:03d} the {ADJ_EN[a]} {NOUN_EN[n]} {VERB_EN[v]} "
        f"the {ADJ_EN[b]} {NOUN_EN[m]} in the morning"
    )
    return de, en


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", default="runs/demo_data")
    parser.add_argument("--pool-size", type=int, default=60)
    parser.add_argument("--test-size", type=int, default=12)
    parser.add_argument("--seed", type=int, default=2024)
    args = parser.parse_args()

    workdir = Path(args.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(args.seed)

    def dump(path: Path, pairs, start=0):
        with open(path, "w", encoding="utf-8") as handle:
            for i, (de, en) in enumerate(pairs, start=start):
                handle.write(
                    json.dumps({"id": f"ex{i:04d}", "src": de, "tgt": en}, ensure_ascii=False)
                    + "\n"
                )

    pool = [sentence_pair(rng, i) for i in range(args.pool_size)]
    test = [sentence_pair(rng, 1000 + i) for i in range(args.test_size)]
    dump(workdir / "pool.de-en.jsonl", pool)
    dump(workdir / "test.de-en.jsonl", test, start=1000)

    mono_src = [sentence_pair(rng, 2000 + i)[0] for i in range(30)]
    mono_tgt = [sentence_pair(rng, 3000 + i)[1] for i in range(30)]
    (workdir / "mono.de.txt").write_text("\n".join(mono_src) + "\n", encoding="utf-8")
    (workdir / "mono.en.txt").write_text("\n".join(mono_tgt) + "\n", encoding="utf-8")

    with open(workdir / "docs.de-en.jsonl", "w", encoding="utf-8") as handle:
        for d in range(3):
            sentences = [
                {"src": de, "tgt": en}
                for de, en in (sentence_pair(rng, 4000 + d * 10 + i) for i in range(9))
            ]
            handle.write(
                json.dumps({"doc_id": f"doc{d}", "sentences": sentences}, ensure_ascii=False)
                + "\n"
            )

    print(f"sample corpus written to {workdir}/")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

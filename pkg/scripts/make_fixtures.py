"""Regenerate the bundled synthetic corpora (fixture.csv, toy32.csv).

Both files follow the id,label,tweet schema of the real dataset. Output is
deterministic for a given seed.
"""

import argparse
import csv
import os
import random

OFFENSIVE = ["idiot", "stupid", "loser", "trash", "pathetic", "disgusting", "moron",
             "dumb", "worthless", "clown", "garbage", "hate"]
NEUTRAL = ["love", "happy", "sunny", "coffee", "friends", "weekend", "music", "beautiful",
           "great", "fun", "family", "birthday", "beach", "thanks", "lovely", "amazing"]
FILLER = ["today", "people", "really", "game", "city", "morning", "night", "team", "show",
          "news", "work", "time", "everyone", "guys", "life", "phone"]
NOISE = ["@user", "#blessed", "#monday", "http://t.co/abc", "www.example.com", "2024", "!!!",
         "\U0001f602", "❤️", "...", "&amp;", "#fail"]


def _tweet(rng, label, n_words):
    words = [rng.choice(FILLER) for _ in range(n_words)]
    cue_pool = OFFENSIVE if label else NEUTRAL
    for _ in range(rng.randint(1, 2)):
        words.insert(rng.randrange(len(words) + 1), rng.choice(cue_pool))
    for _ in range(rng.randint(0, 3)):
        words.insert(rng.randrange(len(words) + 1), rng.choice(NOISE))
    text = " ".join(words)
    return text.capitalize() if rng.random() < 0.5 else text


def _write(path, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "label", "tweet"])
        w.writerows(rows)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=os.path.join("src", "bigrucnn", "data"))
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()
    rng = random.Random(args.seed)

    labels = [1] * 60 + [0] * 140
    rng.shuffle(labels)
    _write(os.path.join(args.out, "fixture.csv"),
           [(i + 1, y, _tweet(rng, y, rng.randint(3, 9))) for i, y in enumerate(labels)])

    labels = [1, 0] * 16
    _write(os.path.join(args.out, "toy32.csv"),
           [(i + 1, y, _tweet(rng, y, rng.randint(2, 5))) for i, y in enumerate(labels)])


if __name__ == "__main__":
    main()

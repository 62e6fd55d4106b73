#!/usr/bin/env python3
# Copyright 2026 The metric-lens Authors
# SPDX-License-Identifier: Apache-2.0
"""Regenerates corpus.tsv, the clean corpus used by the corruption tests.

Every generated translation contains an auxiliary verb, a number and an
entity from entity_lexicon.tsv, so each corruption rule has a site. A few
hand-written rows at the end are ineligible or lack sites on purpose.
"""

import random

PEOPLE = ["Alice", "Bob", "Maria", "Chen", "Fatima", "Kenji"]
CITIES = ["Paris", "London", "Beijing", "Tokyo", "Berlin", "Lagos"]
DAYS = ["Monday", "Friday", "Sunday"]

TEMPLATES = [
    "{p} was in {c} for {n} days.",
    "{p} will visit {c} with {n} friends.",
    "The museum in {c} has {n} rooms that {p} can describe.",
    "{p} did not expect {n} guests on {d}.",
    "The train to {c} is {n} minutes late.",
    "{p} has lived in {c} since {y}.",
    "{p} could not find {n} of the books in {c}.",
    "The report says {c} were {n} points ahead.",
    "{p} should arrive in {c} before {d} with {n} boxes.",
    "In {y}, {p} was already working in {c}.",
    "{p} can't leave {c} until {d} because {n} forms are missing.",
    "The {n} students from {c} are waiting for {p}.",
]

SOURCES = {
    "zh-en": ["他们在那里待了几天。", "报告已经发布了。", "我们明天出发。", "天气很好。"],
    "de-en": ["Sie blieben dort einige Tage.", "Der Bericht ist fertig.",
              "Wir fahren morgen los.", "Das Wetter ist gut."],
}

HEADER = ["system", "doc", "seg_id", "rater", "lang_pair", "severity", "category",
          "source", "target", "reference"]


def fill(rng, template):
    return template.format(p=rng.choice(PEOPLE), c=rng.choice(CITIES),
                           n=rng.randint(2, 95), d=rng.choice(DAYS),
                           y=rng.randint(1960, 2019))


def main():
    rng = random.Random(20260101)
    rows = []
    for i in range(64):
        lp = "zh-en" if i % 2 == 0 else "de-en"
        target = fill(rng, TEMPLATES[i % len(TEMPLATES)])
        reference = fill(rng, TEMPLATES[(i + 5) % len(TEMPLATES)])
        rows.append(["toy", f"doc{i // 8}", str(i + 1), "r1", lp, "No-error", "No-error",
                     rng.choice(SOURCES[lp]), target, reference])
    # Ineligible: annotated error.
    rows.append(["toy", "extra", "1", "r1", "zh-en", "Major", "Accuracy/Mistranslation",
                 "报告已经发布了。", "The <v>letter</v> was published 2 days ago.",
                 "The report was published 2 days ago."])
    # Ineligible: copy of the reference.
    rows.append(["toy", "extra", "2", "r1", "de-en", "No-error", "No-error",
                 "Der Bericht ist fertig.", "Paris is ready for 3 visitors.",
                 "Paris is ready for 3 visitors."])
    # Eligible but without number, auxiliary or entity sites.
    rows.append(["toy", "extra", "3", "r1", "de-en", "No-error", "No-error",
                 "Das Wetter ist gut.", "Lovely weather today.", "The weather is good."])
    with open("corpus.tsv", "w", encoding="utf-8") as f:
        f.write("\t".join(HEADER) + "\n")
        for r in rows:
            f.write("\t".join(r) + "\n")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Generate the recorded wire-transcript fixtures used by the adapter
conformance tests. Each fixture is one chat-completions-shaped response
plus the option-letter set it was recorded for; several carry
hand-computed expected probabilities."""

import json
import math
import os

OUT = os.path.join(os.path.dirname(__file__), "..", "crates", "cli", "tests", "fixtures", "transcripts")


def response(tokens):
    top = [{"token": t, "logprob": lp} for (t, lp) in tokens]
    return {
        "id": "rec",
        "object": "chat.completion",
        "choices": [
            {
                "index": 0,
                "finish_reason": "length",
                "logprobs": {
                    "content": [
                        {"token": tokens[0][0], "logprob": tokens[0][1], "top_logprobs": top}
                    ]
                },
                "message": {"role": "assistant", "content": tokens[0][0]},
            }
        ],
    }


def expected_probs(options, tokens):
    """Independent reference extraction: trim, exact single char,
    first occurrence wins, floor = min(found) - 10, softmax."""
    found = {}
    for (t, lp) in tokens:
        s = t.strip()
        if len(s) == 1 and s in options and s not in found:
            found[s] = lp
    if not found:
        return None
    floor = min(found.values()) - 10.0
    logits = {o: found.get(o, floor) for o in options}
    m = max(logits.values())
    exps = {o: math.exp(v - m) for o, v in logits.items()}
    z = sum(exps.values())
    return {o: exps[o] / z for o in options}


FIXTURES = [
    ("01_two_options_basic", ["A", "B"], [("A", -0.2), ("B", -1.8), (".", -3.0)], True),
    ("02_whitespace_tokens", ["A", "B"], [(" A", -0.5), ("B\n", -1.5), ("ok", -2.0)], True),
    ("03_missing_letter_floor", ["A", "B", "C"], [("A", -0.3), ("B", -1.2)], True),
    ("04_duplicate_first_wins", ["A", "B"], [("A", -0.4), ("A", -2.9), ("B", -1.0)], False),
    ("05_punctuated_ignored", ["A", "B"], [("A.", -0.1), ("A", -0.9), ("B", -1.1)], False),
    ("06_five_options_full", ["A", "B", "C", "D", "E"],
     [("C", -0.8), ("A", -1.1), ("B", -1.9), ("E", -2.5), ("D", -3.0)], True),
    ("07_five_options_two_missing", ["A", "B", "C", "D", "E"],
     [("B", -0.6), ("A", -1.0), ("D", -2.2)], False),
    ("08_lowercase_no_match", ["A", "B"], [("a", -0.1), ("A", -1.4), ("B", -0.7)], False),
    ("09_junk_mixed", ["A", "B", "C"],
     [("the", -0.2), ("A", -0.9), ("answer", -1.0), ("C", -1.3), ("B", -2.0)], False),
    ("10_big_spread", ["A", "B"], [("A", -0.001), ("B", -14.0)], True),
    ("11_tied_logprobs", ["A", "B", "C"], [("A", -1.0), ("B", -1.0), ("C", -1.0)], False),
    ("12_large_negatives", ["A", "B"], [("A", -22.5), ("B", -23.5)], False),
    ("13_out_of_set_letter", ["A", "B"], [("E", -0.1), ("A", -0.8), ("B", -1.2)], False),
    ("14_single_found", ["A", "B", "C", "D"], [("D", -0.2), ("yes", -1.0)], False),
    ("15_reversed_ranking", ["A", "B"], [("B", -0.3), ("A", -1.7)], True),
    ("16_tab_whitespace", ["A", "B"], [("\tB", -0.4), ("A", -1.1)], False),
    ("17_six_options", ["A", "B", "C", "D", "E", "F"],
     [("F", -0.9), ("E", -1.2), ("A", -1.5), ("B", -1.8), ("C", -2.1), ("D", -2.4)], False),
    ("18_certain_token", ["A", "B"], [("A", 0.0), ("B", -9.0)], False),
    ("19_uniform_letters", ["A", "B", "C", "D"],
     [("A", -1.386), ("B", -1.386), ("C", -1.386), ("D", -1.386)], False),
    ("20_mixed_everything", ["A", "B", "C"],
     [(" B ", -0.5), ("B", -3.0), ("A.", -0.2), ("A", -1.4), ("stop", -2.0)], True),
]


def main():
    os.makedirs(OUT, exist_ok=True)
    for name, options, tokens, embed in FIXTURES:
        doc = {
            "name": name,
            "options": options,
            "request": {
                "model": "scorer",
                "messages": [{"role": "user", "content": "(prompt omitted)"}],
                "max_tokens": 1,
                "logprobs": True,
                "top_logprobs": max(8, len(options) + 2),
            },
            "response": response(tokens),
        }
        if embed:
            doc["expected"] = expected_probs(options, tokens)
        path = os.path.join(OUT, f"{name}.json")
        with open(path, "w") as f:
            json.dump(doc, f, indent=2, sort_keys=True)
            f.write("\n")
    print(f"wrote {len(FIXTURES)} fixtures to {OUT}")


if __name__ == "__main__":
    main()

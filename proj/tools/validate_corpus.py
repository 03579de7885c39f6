#!/usr/bin/env python3
"""Validate every line of a corpus.jsonl file against docs/corpus.schema.json."""
import json
import pathlib
import sys

import jsonschema

SCHEMA = pathlib.Path(__file__).resolve().parent.parent / "docs" / "corpus.schema.json"


def main(argv):
    if len(argv) != 2:
        print("usage: validate_corpus.py CORPUS.jsonl", file=sys.stderr)
        return 2
    validator = jsonschema.Draft202012Validator(json.loads(SCHEMA.read_text()))
    bad = 0
    lines = pathlib.Path(argv[1]).read_text().splitlines()
    for n, line in enumerate(lines, 1):
        for err in validator.iter_errors(json.loads(line)):
            bad += 1
            print(f"line {n}: {err.message}", file=sys.stderr)
    print(f"{len(lines)} lines, {bad} errors")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))

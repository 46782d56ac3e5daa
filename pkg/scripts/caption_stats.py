"""Compare part-of-speech profiles and noun uniqueness of several caption sources.

Each input is a manifest or a text file with one caption per line.
"""

import argparse
import json

from motionpairs.analytics import default_tag_lexicon, noun_uniqueness, pos_profile
from motionpairs.cli import _read_captions


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("inputs", nargs="+")
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args()
    rows = {}
    for path in args.inputs:
        captions, objects = _read_captions(path)
        lex = default_tag_lexicon().with_objects(objects)
        rows[path] = {**pos_profile(captions, lex).to_dict(), "noun_uniqueness": noun_uniqueness(captions, lex)}
    if args.json:
        print(json.dumps(rows, indent=2))
        return
    cols = ["num_captions", "noun", "adjective", "verb", "adverb", "adposition", "noun_uniqueness"]
    print("source".ljust(30) + "".join(c[:10].rjust(12) for c in cols))
    for path, r in rows.items():
        print(path[-30:].ljust(30) + "".join(f"{r[c]:12.3f}" if isinstance(r[c], float) else f"{r[c]:12d}" for c in cols))


if __name__ == "__main__":
    main()

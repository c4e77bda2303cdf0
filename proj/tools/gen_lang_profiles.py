#!/usr/bin/env python3
"""Convert langdetect n-gram profiles into the flat TSV read by LanguageDetector.

Usage: gen_lang_profiles.py <langdetect/profiles dir> <out.tsv> [lang ...]

Output format:
    @<lang>\t<n1>\t<n2>\t<n3>      header: total 1/2/3-gram counts
    <gram>\t<count>                 one gram per line until the next header
"""
import json
import os
import sys

DEFAULT_LANGS = (
    "bg ca cs cy da de el en es et fi fr hr hu id it lt lv nl no "
    "pl pt ro ru sk sl sq sv tr uk"
).split()


def main(argv):
    if len(argv) < 3:
        print(__doc__, file=sys.stderr)
        return 2
    src, out = argv[1], argv[2]
    langs = argv[3:] or DEFAULT_LANGS
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        for lang in sorted(langs):
            with open(os.path.join(src, lang), encoding="utf-8") as pf:
                profile = json.load(pf)
            n_words = profile["n_words"]
            fh.write(f"@{lang}\t{n_words[0]}\t{n_words[1]}\t{n_words[2]}\n")
            for gram, count in sorted(profile["freq"].items()):
                if "\t" in gram or "\n" in gram or not 1 <= len(gram) <= 3:
                    continue
                fh.write(f"{gram}\t{count}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))

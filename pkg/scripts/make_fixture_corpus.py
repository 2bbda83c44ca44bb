"""Write procedural linear HDR scenes as 16-bit PNGs (the gen-dataset input format).

    python scripts/make_fixture_corpus.py --out fixtures/hdr --count 20 --size 192
"""

import argparse

from mefdata.synthetic import write_hdr_corpus


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", required=True)
    ap.add_argument("--count", type=int, default=20)
    ap.add_argument("--size", type=int, default=192)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    for p in write_hdr_corpus(args.out, args.count, args.size, args.seed):
        print(p)


if __name__ == "__main__":
    main()

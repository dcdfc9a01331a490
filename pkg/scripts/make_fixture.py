#!/usr/bin/env python3
"""Generate the synthetic demo corpus (manifest, embeddings, annotations,
BLS table, audit config) into a directory.

Usage:
    python scripts/make_fixture.py out/fixture [--seed 0] [--no-images]
"""

import argparse

from tti_audit.synthetic import make_audit_fixture


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--no-images", action="store_true")
    args = parser.parse_args()
    paths = make_audit_fixture(args.out_dir, seed=args.seed, write_images=not args.no_images)
    for name, path in paths.items():
        print(f"{name:16s} {path}")


if __name__ == "__main__":
    main()

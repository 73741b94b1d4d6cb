#!/usr/bin/env python3
"""Replaces a __HEADER__ placeholder line with the project license header."""
import pathlib
import sys

header = (pathlib.Path(__file__).parent / "license_header.txt").read_text().rstrip("\n")


def hash_comment(block):
    lines = block.splitlines()
    lines[0] = lines[0].removeprefix("/* ")
    lines = [l for l in lines if not l.startswith("=====")]
    return "\n".join(("# " + l).rstrip() for l in lines)


for name in sys.argv[1:]:
    p = pathlib.Path(name)
    s = p.read_text()
    if "__HEADER__" in s:
        text = hash_comment(header) if p.suffix in (".py", ".cmake", ".txt") else header
        p.write_text(s.replace("__HEADER__", text, 1))

#!/usr/bin/env python3
"""Regenerate the frozen canonicalization outputs under expected/.

Builds oracle.c against the system libxml2 shared object and runs it for
every case in manifest.json. The committed expected/ files are the contract;
rerun this only when extending the corpus, and review diffs carefully.
"""

import ctypes.util
import json
import pathlib
import subprocess
import sys

HERE = pathlib.Path(__file__).resolve().parent


def find_libxml2() -> str:
    found = ctypes.util.find_library("xml2")
    if found and pathlib.Path(found).is_absolute():
        return found
    for libdir in ("/usr/lib/x86_64-linux-gnu", "/usr/lib", "/usr/lib64"):
        candidate = pathlib.Path(libdir) / (found or "libxml2.so.2")
        if candidate.exists():
            return str(candidate)
    sys.exit("libxml2 shared object not found")


def main() -> None:
    oracle = HERE / "oracle.bin"
    subprocess.run(
        ["gcc", "-O2", str(HERE / "oracle.c"), find_libxml2(), "-o", str(oracle)],
        check=True,
    )
    manifest = json.loads((HERE / "manifest.json").read_text())
    for case in manifest["cases"]:
        mode = "1" if case["algorithm"] == "exclusive" else "0"
        comments = "1" if case["with_comments"] else "0"
        args = [
            str(oracle),
            str(HERE / case["input"]),
            mode,
            comments,
            case["subtree"],
        ]
        prefixes = case.get("inclusive_prefixes", [])
        if prefixes:
            args.append(",".join(prefixes))
        out = subprocess.run(args, check=True, capture_output=True).stdout
        target = HERE / case["expected"]
        target.parent.mkdir(exist_ok=True)
        target.write_bytes(out)
        print(f"{case['expected']}: {len(out)} bytes")
    oracle.unlink()


if __name__ == "__main__":
    main()

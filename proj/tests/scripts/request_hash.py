#!/usr/bin/env python3
"""Independent transcript-hash oracle.

Usage: request_hash.py REQUEST.json            print the hash
       request_hash.py REQUEST.json HASHFILE   compare with the first token of HASHFILE
"""
import hashlib
import json
import sys


def canonical(req):
    body = {
        "system": req["system"],
        "user": req["user"],
        "model": req["model"],
        "temperature": "%.3f" % float(req["temperature"]),
        "max_tokens": int(req["max_tokens"]),
        "response_hint": req["response_hint"],
    }
    return json.dumps(body, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def request_hash(req):
    return hashlib.sha256(canonical(req).encode("utf-8")).hexdigest()


def main(argv):
    with open(argv[1], encoding="utf-8") as f:
        digest = request_hash(json.load(f))
    if len(argv) > 2:
        with open(argv[2], encoding="utf-8") as f:
            other = f.read().split()[0]
        if other != digest:
            print(f"mismatch: oracle {digest} vs {other}")
            return 1
    print(digest)
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))

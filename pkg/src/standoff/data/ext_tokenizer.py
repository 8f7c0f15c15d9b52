#!/usr/bin/env python3
"""Reference external tokenizer speaking the line-delimited JSON protocol.

Reads one request object from stdin, writes one response object to stdout.
Deliberately self-contained and implemented differently from the in-process
tokenizer (regex over the text plus a byte-offset prefix table instead of a
character scan) so the two can be compared differentially.
"""

import json
import re
import sys

# a word is a maximal alphanumeric run; any other non-space char stands alone
TOKEN_RE = re.compile(r"[^\W_]+|\S")


def main() -> int:
    line = sys.stdin.readline()
    try:
        request = json.loads(line)
    except json.JSONDecodeError as exc:
        print(f"bad request: {exc}", file=sys.stderr)
        return 2
    if request.get("proto") != 1:
        print(f"unsupported protocol {request.get('proto')!r}", file=sys.stderr)
        return 2
    text = request.get("text")
    if not isinstance(text, str):
        print("request has no text", file=sys.stderr)
        return 2

    offsets = [0]
    for ch in text:
        offsets.append(offsets[-1] + len(ch.encode("utf-8")))

    new_annotations = []
    for match in TOKEN_RE.finditer(text):
        start, end = match.span()
        new_annotations.append(
            {"type": "token", "spans": [[offsets[start], offsets[end]]], "attributes": {}}
        )
    json.dump({"proto": 1, "new_annotations": new_annotations}, sys.stdout, ensure_ascii=False)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())

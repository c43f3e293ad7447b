#!/usr/bin/env python3
"""Serve the generation/scoring wire protocol from canned data, so the CLI
can be exercised end to end over real HTTP.

Two modes:
  --echo-corpus FILE[,FILE...]   echo the reference of the test segment whose
                                 source occurs last in the prompt (JSONL pools)
  --table FILE                   explicit {"prompt": "continuation"} JSON map

Scoring requests answer with a token-count-based pseudo log-likelihood.
"""

import argparse
import json
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path


def load_echo_lookup(paths):
    lookup = []
    for path in paths:
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                record = json.loads(line)
                lookup.append((record["src"], record["tgt"]))
    return lookup


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--port", type=int, default=8041)
    parser.add_argument("--table", help="JSON file mapping prompt -> continuation")
    parser.add_argument("--echo-corpus", help="comma-separated JSONL pool files")
    args = parser.parse_args()

    table = {}
    lookup = []
    if args.table:
        table = json.loads(Path(args.table).read_text(encoding="utf-8"))
    if args.echo_corpus:
        lookup = load_echo_lookup(args.echo_corpus.split(","))
    if not table and not lookup:
        parser.error("need --table or --echo-corpus")

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *unused):
            pass

        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            payload = json.loads(self.rfile.read(length))
            if "text_to_score" in payload:
                tokens = max(1, len(payload["text_to_score"].split()))
                body = {"logprob": -0.5 * tokens, "tokens": tokens}
            else:
                prompt = payload.get("prompt", "")
                text = table.get(prompt, "")
                if not text and lookup:
                    best_pos = -1
                    for src, tgt in lookup:
                        pos = prompt.rfind(src)
                        if pos > best_pos:
                            best_pos, text = pos, tgt
                body = {"text": text, "tokens": len(text.split())}
            raw = json.dumps(body, ensure_ascii=False).encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(raw)))
            self.end_headers()
            self.wfile.write(raw)

    server = ThreadingHTTPServer(("127.0.0.1", args.port), Handler)
    print(f"mock backend listening on http://127.0.0.1:{args.port}/ "
          f"({len(table)} table entries, {len(lookup)} echo pairs)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

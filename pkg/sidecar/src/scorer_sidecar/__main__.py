"""CLI entry point: load models, refuse to serve on failure, then listen."""

from __future__ import annotations

import argparse
import sys

from .app import create_app
from .config import SidecarConfig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="scorer-sidecar", description=__doc__)
    parser.add_argument("--port", type=int, help="listen port (overrides config)")
    parser.add_argument("--host", help="listen address (overrides config)")
    parser.add_argument("--models-config", help="YAML file with model identifiers")
    args = parser.parse_args(argv)

    try:
        config = (
            SidecarConfig.from_file(args.models_config)
            if args.models_config
            else SidecarConfig()
        )
        if args.port is not None:
            config = SidecarConfig(**{**config.__dict__, "port": args.port})
        if args.host is not None:
            config = SidecarConfig(**{**config.__dict__, "host": args.host})
        app = create_app(config)
    except Exception as exc:
        print(f"refusing to serve: {exc}", file=sys.stderr)
        return 1

    import uvicorn

    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

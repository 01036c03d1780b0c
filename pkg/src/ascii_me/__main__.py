"""Entry point for ``python -m ascii_me``."""

from .cli import main

if __name__ == "__main__":
    raise SystemExit(main())

"""Module entrypoint for ``python -m el_mimic``."""

from .cli import main

if __name__ == "__main__":
    main()

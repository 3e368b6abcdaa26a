"""Entry point for the CLI."""

from dual_hormone_ap.cli import app

if __name__ == "__main__":
    app()

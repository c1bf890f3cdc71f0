"""Allow running flipgraph_mm as a module: python -m flipgraph_mm"""

from flipgraph_mm.cli import cli

if __name__ == "__main__":
    cli()

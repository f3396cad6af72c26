"""Controller synthesis and backward reachable set approximation for
discrete-time polynomial systems via moment relaxations."""

__version__ = "0.1.0"

"""One class per command family, each driven by a single verb method."""

"""Neural side of the fusion pipeline: embedding scorer, logical-score fusion, NLI batch scoring."""

__version__ = "0.1.0"

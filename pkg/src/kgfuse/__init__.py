"""Knowledge-graph link prediction by fusing filtered Horn rules with neural entity scores."""

__version__ = "0.1.0"

"""rallycast: next-shot forecasting for racquet rallies.

A perception encoder turns the rasterized rally state into a context
embedding; per-player episodic memory (a tree of gated cells over recent
embeddings) and a shared semantic memory matrix supply historical context; a
noise-conditioned decoder generates the response-shot map, trained
adversarially with an auxiliary shot-type classifier.
"""

__version__ = "0.1.0"

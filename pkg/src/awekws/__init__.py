"""Keyword spotting over spoken utterances with acoustic word embeddings.

Subpackages follow the pipeline: corpus I/O, segmentation, the
correspondence-autoencoder embedding model and its training loop, exact
cosine-distance search, the ASR-transcript baseline, evaluation metrics,
a synthetic corpus generator, and the human moderation service.
"""

__version__ = "0.1.0"

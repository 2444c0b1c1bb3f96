"""Daily subjective well-being index from short social-media posts.

Pipeline: ingest archived posts, select and hand-label training candidates,
estimate each day's aggregate sentiment distribution per well-being
dimension, average the eight dimension scores into a composite index, and
relate the yearly series to economic covariates through a latent-variable
structural model.
"""

__version__ = "0.1.0"

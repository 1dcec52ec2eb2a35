"""sememepred: predict weakly ordered semantic labels from descriptions.

Subpackages: ndcore (tensors + autodiff + Adam), data (corpora, synthetic
generation, label embeddings); modules: model, loss, baselines, evaluate,
training, bundle, checks, cli.
"""

__version__ = "0.1.0"

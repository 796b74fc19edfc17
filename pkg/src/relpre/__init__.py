"""Object-relation embeddings from simulated pairwise interactions plus
graph-structured skill precondition classifiers."""

__version__ = "0.1.0"

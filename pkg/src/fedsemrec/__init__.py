"""Federated two-domain sequential recommender.

Clients learn on private interaction sequences; the only thing that ever
crosses the wire is item-level semantic encodings, which the server
clusters and returns as shared centroid vectors.
"""

__version__ = "0.1.0"

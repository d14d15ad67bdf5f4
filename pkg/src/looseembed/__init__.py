"""Loose embeddings of finite metric spaces into Euclidean space."""

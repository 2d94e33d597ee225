"""statutelab: a desk-scale statute retrieval and knowledge-injection lab."""

__version__ = "0.1.0"

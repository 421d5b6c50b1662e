"""kgcontext: dynamic knowledge-graph context selection and embedding for a toy language model."""

__version__ = "0.1.0"

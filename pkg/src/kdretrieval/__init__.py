"""Teacher/student document retrieval with soft-label distillation.

Subpackages: ``autodiff`` (tensor engine), ``corpus`` (text, TF-IDF mining,
candidate sets), ``models`` (students and teacher), ``distillation``
(losses and training), plus ``metrics``, ``index_runtime``, ``estimators``
and the ``cli``.
"""
__version__ = "0.1.0"

from .exceptions import KDRError

__all__ = ["KDRError", "__version__"]

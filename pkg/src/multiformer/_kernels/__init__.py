"""Hot kernels with a compiled (Cython) core and a pure-Python fallback.

The compiled module is preferred when it imports. Setting ``MF_PURE_PYTHON=1``
forces the fallback, which is also what runs when the extension was not built.
"""

import os
from types import ModuleType

from . import _fallback

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

__all__ = ["BACKEND", "hungarian_min", "local_maxima", "paf_pair_scores", "col2im", "backend", "available_backends"]


def available_backends() -> list[str]:
    return ["python"] + (["cython"] if _ckernels is not None else [])


def backend(name: str) -> ModuleType:
    if name == "python":
        return _fallback
    if name == "cython":
        if _ckernels is None:
            raise ImportError("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")


if _ckernels is not None and os.environ.get("MF_PURE_PYTHON", "").lower() not in ("1", "true", "yes"):
    BACKEND = "cython"
else:
    BACKEND = "python"

_impl = backend(BACKEND)
hungarian_min = _impl.hungarian_min
local_maxima = _impl.local_maxima
paf_pair_scores = _impl.paf_pair_scores
col2im = _impl.col2im

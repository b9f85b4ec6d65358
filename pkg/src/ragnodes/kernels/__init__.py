"""Hot loops: exhaustive cosine top-k and metric reductions.

The compiled extension is used when it was built; otherwise the numpy
fallback is selected at import. Set ``RAGNODES_KERNELS=python`` to force the
fallback, or ``=cython`` to fail loudly when the extension is missing.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _fallback

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_IMPLS: dict[str, ModuleType] = {"python": _fallback}
if _ckernels is not None:
    _IMPLS["cython"] = _ckernels


def available_backends() -> list[str]:
    return sorted(_IMPLS)


def implementation(name: str | None = None) -> ModuleType:
    """Kernel module by name; default honours RAGNODES_KERNELS, preferring the compiled one."""
    name = name or os.environ.get("RAGNODES_KERNELS") or ("cython" if _ckernels is not None else "python")
    try:
        return _IMPLS[name]
    except KeyError:
        raise ImportError(f"kernel backend {name!r} unavailable; have {available_backends()}") from None


_active = implementation()
BACKEND = "cython" if _active is _ckernels else "python"

scores = _active.scores
topk = _active.topk
mean_of_means = _active.mean_of_means
contextual_precision = _active.contextual_precision

__all__ = ["BACKEND", "available_backends", "contextual_precision", "implementation",
           "mean_of_means", "scores", "topk"]

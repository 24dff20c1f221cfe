"""Forward-only attention kernels, compiled when available.

``BACKEND`` is ``"compiled"`` when the Cython extension imports, otherwise
``"python"``. Set ``FLOWFUSION_BACKEND=python`` to force the fallback.
Both backends are always reachable through :func:`get_backend`.
"""

import os
from types import ModuleType

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_BACKENDS: dict[str, ModuleType] = {"python": _kernels_py}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def get_backend(name: str = "auto") -> ModuleType:
    if name == "auto":
        name = BACKEND
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} unavailable; have {available_backends()}") from None


_requested = os.environ.get("FLOWFUSION_BACKEND", "auto")
if _requested == "auto":
    BACKEND = "compiled" if _compiled is not None else "python"
else:
    get_backend(_requested)
    BACKEND = _requested

_active = _BACKENDS[BACKEND]
flow_attention_factorized = _active.flow_attention_factorized
flow_attention_quadratic = _active.flow_attention_quadratic
softmax_attention = _active.softmax_attention

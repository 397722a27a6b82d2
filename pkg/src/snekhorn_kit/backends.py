"""Hot-kernel backend selection.

The numeric inner loops (pairwise distances, per-row bandwidth
bisection, Sinkhorn fixed point, dual-ascent row statistics) exist in
two interchangeable implementations: numba-jitted loops and pure numpy.
The active backend is chosen once at import from the environment
variable ``SNEKHORN_BACKEND``:

* ``auto`` (default) — numba when importable, numpy otherwise;
* ``numba`` — require numba, raise if unavailable;
* ``numpy`` — force the pure-numpy fallback.

``use()`` switches the backend at runtime (tests and benchmarks).
"""

import os

from . import _kernels_numpy

ENV_VAR = "SNEKHORN_BACKEND"

_numba_import_error = None
try:
    from . import _kernels_numba
except ImportError as exc:  # pragma: no cover - depends on environment
    _kernels_numba = None
    _numba_import_error = exc


def available() -> tuple[str, ...]:
    names = ["numpy"]
    if _kernels_numba is not None:
        names.append("numba")
    return tuple(names)


def _resolve(name: str):
    name = name.lower()
    if name == "numpy":
        return _kernels_numpy
    if name == "numba":
        if _kernels_numba is None:
            raise RuntimeError(
                f"{ENV_VAR}=numba but numba is not importable: "
                f"{_numba_import_error}"
            )
        return _kernels_numba
    if name == "auto":
        return _kernels_numba if _kernels_numba is not None else _kernels_numpy
    raise ValueError(
        f"unknown backend {name!r}; expected auto, numba or numpy"
    )


_active = _resolve(os.environ.get(ENV_VAR, "auto"))


def get():
    """Module implementing the active kernel set."""
    return _active


def use(name: str) -> str:
    """Switch the active backend; returns the previous backend name."""
    global _active
    previous = _active.NAME
    _active = _resolve(name)
    return previous

"""Backend selection for the inner-loop kernels.

The compiled Cython module is used when it has been built; otherwise the
numpy fallback is used. Setting ``MEANFIELD_PURE_PYTHON=1`` forces the
fallback, which is what the benchmark and the cross-backend tests do.
"""

import os

from . import _kernels_py

if os.environ.get("MEANFIELD_PURE_PYTHON", "") not in ("", "0"):
    _compiled = None
else:
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

_impl = _compiled if _compiled is not None else _kernels_py

BACKEND = "cython" if _compiled is not None else "python"

weighted_laplacian = _impl.weighted_laplacian
dirichlet_energy = _impl.dirichlet_energy
ball_sums = _impl.ball_sums


def compiled_available():
    return _compiled is not None

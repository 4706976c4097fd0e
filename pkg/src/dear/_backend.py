"""Backend selection for the hot numeric kernels.

DEAR_BACKEND=numba   force the jitted kernels (error if numba is missing)
DEAR_BACKEND=numpy   force the pure-numpy fallback
unset / auto         numba when importable, numpy otherwise
"""

import os
import warnings

_requested = os.environ.get("DEAR_BACKEND", "auto").strip().lower()

if _requested not in ("auto", "numba", "numpy", ""):
    raise ValueError(f"DEAR_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

if _requested == "numpy":
    from . import _impl_numpy as _impl
elif _requested == "numba":
    from . import _impl_numba as _impl
else:
    try:
        from . import _impl_numba as _impl
    except ImportError:  # pragma: no cover - depends on environment
        warnings.warn("numba unavailable, falling back to the numpy backend")
        from . import _impl_numpy as _impl

BACKEND = _impl.BACKEND_NAME

amk_weight_matrix = _impl.amk_weight_matrix
gm_pdf = _impl.gm_pdf
gm_cdf = _impl.gm_cdf
psi4_pair_sum = _impl.psi4_pair_sum
normal_cdf_vec = _impl.normal_cdf_vec

"""Backend selection for the dense-factor kernels.

The compiled extension is preferred; the pure-numpy fallback keeps the
package importable without a C toolchain.  Set ``SLAMPLAN_PURE_PYTHON=1``
to force the fallback (used by the kernel benchmark).
"""

import os

if os.environ.get("SLAMPLAN_PURE_PYTHON"):
    from . import _chol_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _chol as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        from . import _chol_py as _impl  # type: ignore[no-redef]

        BACKEND = "python"

chol_update = _impl.chol_update
solve_lower = _impl.solve_lower

"""Kernel backend selection: compiled core if importable, else the numpy fallback.

Set ``PDFEM_BACKEND=python`` to force the fallback.
"""

import os

if os.environ.get("PDFEM_BACKEND", "").lower() == "python":
    from pdfem import _pykernels as kernels
else:
    try:
        from pdfem import _ckernels as kernels
    except ImportError:
        from pdfem import _pykernels as kernels

BACKEND = kernels.BACKEND

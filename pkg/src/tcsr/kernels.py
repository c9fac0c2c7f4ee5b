"""Backend selection for the arrowhead integration kernels.

The compiled extension is used when it imports; otherwise, or when
``TCSR_PURE_PYTHON`` is set to a non-empty value, the NumPy implementation
takes over. Both expose ``forward`` and ``adjoint`` with identical
signatures.
"""

import os

from . import _kernels_py

BACKEND = "python"
forward = _kernels_py.forward
adjoint = _kernels_py.adjoint

if not os.environ.get("TCSR_PURE_PYTHON"):
    try:
        from . import _kernels_cy
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "cython"
        forward = _kernels_cy.forward
        adjoint = _kernels_cy.adjoint


def get_backend(name):
    """Return the (forward, adjoint) pair of a named backend."""
    if name == "python":
        return _kernels_py.forward, _kernels_py.adjoint
    if name == "cython":
        from . import _kernels_cy

        return _kernels_cy.forward, _kernels_cy.adjoint
    raise ValueError(f"unknown backend {name!r}")

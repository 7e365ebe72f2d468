"""Hot-loop kernels with a compiled core and a numpy fallback.

The Cython extension `_fast` is optional: if it failed to build (or if the
environment variable GIBBSLAB_PURE_PYTHON is set to a nonempty value) the
pure-numpy reference implementations in `_ref` are used instead. Both expose
the same two functions:

    occupation_products(vs, occs)   -- prod_j vs[s, j] ** occs[d, j]
    two_body_coo(occs, table, strides, W)  -- COO triplets of the normal
        ordered two-body operator (1/2) sum W[i,j,k,l] a_i+ a_j+ a_l a_k

`BACKEND` records which implementation was selected; `benchmarks/` times one
against the other.
"""

import os

from . import _ref

if os.environ.get("GIBBSLAB_PURE_PYTHON"):
    occupation_products = _ref.occupation_products
    two_body_coo = _ref.two_body_coo
    BACKEND = "numpy (forced)"
else:
    try:
        from ._fast import occupation_products, two_body_coo

        BACKEND = "cython"
    except ImportError:
        occupation_products = _ref.occupation_products
        two_body_coo = _ref.two_body_coo
        BACKEND = "numpy"

__all__ = ["occupation_products", "two_body_coo", "BACKEND"]

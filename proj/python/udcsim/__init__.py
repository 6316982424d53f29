# Copyright 2026 the udcsim authors
# SPDX-License-Identifier: Apache-2.0
"""Under-display camera degradation and restoration toolkit."""

try:
    from udcsim._core import *  # noqa: F401,F403
    from udcsim._core import __doc__ as _core_doc  # noqa: F401
except ImportError:
    # Build-tree layout: the extension sits on sys.path as a top-level module.
    from _core import *  # noqa: F401,F403

__version__ = "0.1.0"

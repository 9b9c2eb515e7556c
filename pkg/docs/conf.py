"""Sphinx configuration for the el-mimic docs: EL+ reasoning traces and the recurrent models."""

from __future__ import annotations

from importlib.metadata import PackageNotFoundError
from importlib.metadata import version as dist_version

from el_mimic import __version__

project = "el-mimic"
author = "el-mimic developers"
copyright = f"2026, {author}"
try:
    release = dist_version("el-mimic")
except PackageNotFoundError:
    release = __version__
version = ".".join(release.split(".")[:2])

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.napoleon",
    "sphinx.ext.intersphinx",
    "sphinx.ext.mathjax",
]

exclude_patterns = ["_build"]
default_role = "code"
rst_prolog = """
.. |EL+| replace:: :math:`\\mathcal{EL}^{+}`
"""

intersphinx_mapping = {
    "python": ("https://docs.python.org/3", None),
    "numpy": ("https://numpy.org/doc/stable", None),
    "pandas": ("https://pandas.pydata.org/docs", None),
}

autodoc_member_order = "bysource"
autodoc_typehints = "description"
autodoc_default_options = {"members": True}
napoleon_numpy_docstring = False

html_theme = "furo"
html_title = f"el-mimic {release}"

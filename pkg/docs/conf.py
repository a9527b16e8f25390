# Sphinx configuration for the pairgen API docs.
#
# `tox -e docs` regenerates docs/source with sphinx-apidoc before building.

import os
import sys

sys.path.insert(0, os.path.abspath(os.path.join(__file__, "..", "..")))

project = u"pairgen"
copyright = u"2026, pairgen developers"
author = u"pairgen developers"
version = u""
release = u"0.1"

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.mathjax",
    "sphinx.ext.viewcode",
    "sphinx.ext.napoleon",
    "m2r2",
]

# heavy numeric packages are mocked during autodoc
autodoc_mock_imports = ["torch", "numpy", "scipy", "pandas", "PIL"]

templates_path = ["_templates"]
source_suffix = [".rst", ".md"]
master_doc = "index"
exclude_patterns = [u"_build", "Thumbs.db", ".DS_Store"]

html_theme = "alabaster"
htmlhelp_basename = "pairgendoc"

man_pages = [(master_doc, "pairgen", u"pairgen Documentation", [author], 1)]

# -*- coding: utf-8 -*-
#
# biobb_rnot documentation build configuration file.

import sys
from pathlib import Path

# Blocks are documented as rnot.<block>, rnot_extra.<block> and core.<module>
sys.path.insert(0, str(Path('../../').resolve()))

# -- General configuration ------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.coverage',
    'sphinx.ext.mathjax',
    'sphinx.ext.viewcode',
    'sphinx.ext.napoleon',
    'sphinx_rtd_theme',
    'recommonmark'
]

# Using Google docstring style
napoleon_numpy_docstring = False
napoleon_google_docstring = True

templates_path = ['_templates']

# -- Integrate markdown ---------------------------------------------------
source_parsers = {
   '.md': 'recommonmark.parser.CommonMarkParser',
}

source_suffix = ['.rst', '.md']

master_doc = 'index'

project = u'biobb_rnot'
copyright = u'2026, Bioexcel Project'
author = u'Bioexcel Project'

version = u'1.0.0'
release = u'1.0.0'

language = None

exclude_patterns = []

pygments_style = 'sphinx'

todo_include_todos = False


# -- Options for HTML output ----------------------------------------------
html_theme = 'sphinx_rtd_theme'

htmlhelp_basename = 'biobb_rnot_doc'

# -- Options for LaTeX output ---------------------------------------------

latex_elements = {}

latex_documents = [
    (master_doc, 'biobb_rnot.tex', u'biobb_rnot Documentation',
     u'Bioexcel Project', 'manual'),
]

# -- Options for manual page output ---------------------------------------

man_pages = [
    (master_doc, 'biobb_rnot', u'biobb_rnot Documentation',
     [author], 1)
]

# -- Options for Texinfo output -------------------------------------------

texinfo_documents = [
    (master_doc, 'biobb_rnot', u'biobb_rnot Documentation',
     author, 'biobb_rnot', 'biobb_rnot optimal transport building blocks on spheres and tori',
     'Miscellaneous'),
]

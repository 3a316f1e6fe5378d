"""Spectral-gap certification for quasicrystalline tight-binding models.

Subpackages follow the pipeline: exact quadratic-ring arithmetic
(`exactnum`), cut-and-project geometry (`cutproject`), exact region
decomposition (`regions`), Hamiltonian builders (`models`), the resolvent
gap certifier and spectral bounds (`certifier`), and the command-line
front end (`cli`).
"""

__version__ = "0.1.0"

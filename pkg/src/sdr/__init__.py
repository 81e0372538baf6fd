"""Sparse dot representations of images and their Rydberg-atom dynamics.

Modules, in pipeline order: ``imaging`` (edges and contours),
``generalization`` (resampling and budgeted RDP), ``embedding`` (atom
registers), ``rydberg`` (waveforms and Hamiltonians), ``evolution``
(time stepping and sampling), ``matching`` (Chamfer ranking) and ``store``
(on-disk databases). ``pipeline`` ties them together behind ``Config``.
"""

__version__ = "0.1.0"

"""Offline model trainer for the impostor-detection toolkit.

Consumes the cached-dataset (.npz) and split (.json) files written by
`sidsim prepare` and exports self-describing model bundles; the bundle
archive format is the only interface shared with the toolkit.
"""

__version__ = "0.1.0"

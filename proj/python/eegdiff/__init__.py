"""EEG spectro-image synthesis and augmentation toolbox.

Thin wrapper over the compiled extension: synthetic recording generation,
short-time Fourier maps, diffusion-model training and sampling, the conv
classifier, and the confidence-interval helper.
"""

try:
    from eegdiff._core import *  # noqa: F401,F403  (installed layout)
except ImportError:  # in-tree build: _core sits directly on PYTHONPATH
    from _core import *  # noqa: F401,F403

__version__ = "0.1.0"

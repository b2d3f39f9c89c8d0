"""Sensing toolkit for a camera-and-microphone instrumented robot paw.

Two on-edge inference tasks, reproduced at desk scale against a synthetic
data oracle:

* 3-D contact-force regression from grayscale images of a deformable
  dot-patterned sole (``imaging`` + ``nncore`` + ``pipeline``).
* Terrain classification from impact audio via MFCC features
  (``dsp`` + ``nncore`` + ``pipeline``).

``pawsim`` generates deterministic synthetic datasets standing in for the
physical test rig, ``modelstore`` serializes models and audits them against
microcontroller RAM/latency budgets, and ``service``/``cli`` expose the
whole pipeline over HTTP and the command line.
"""

__version__ = "0.1.0"

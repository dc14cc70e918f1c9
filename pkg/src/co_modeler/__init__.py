"""co-modeler: collaborative image-classifier workbench.

A multi-user platform for building, testing, and iterating on image
classifiers over a shared synchronized dataset: label ontologies, event-
sourced sync, deterministic feature extraction and training, photo/live
classification with a test dashboard, and the Restaurant Frenzy evaluation
game.
"""

__version__ = "0.1.0"

"""Surface-EMG grasp recognition pipeline.

Submodules:
  signals   -- trials, muscle-onset detection, overlapping windowing
  emd       -- empirical mode decomposition and Hilbert tracks
  features  -- time/frequency/instantaneous-frequency features and vectors
  dimred    -- standardization, PCA, RELIEF feature weighting
  classify  -- LDC, k-NN, PNN, SVM (SMO) and centroid classifiers
  crossval  -- trial-level 5x2 cross-validation with nested selection
  dataio    -- trial text files, feature datasets, SimPlot frames, synthesis
  cli       -- command-line front end
"""

__version__ = "0.1.0"

# Defaults pinned to the experimental protocol.
ETA = 0.1
C = 15.0
P = 1.0
OUTER_ITERS = 10
INNER_TOL = 1e-6
INNER_MAX = 50
EPS_DIST = 1e-8
SEED = 42

INIT_METHODS = ("pca", "random")
INIT = "pca"

# every: rescale each outer iteration; first: freeze the first scale; off: raw fidelities
NORMALIZATION_MODES = ("every", "first", "off")
NORMALIZATION = "every"

# corruption and split protocol
OCCLUDE_FRACTION = 0.3
SIDE_RATIO = 0.25
FILL_MODES = ("black", "uniform-random")
FILL = "black"
TRAIN_RATIO = 0.5

# numerical tolerances
ORTHONORMAL_TOL = 1e-8
DEGENERATE_RTOL = 1e-12
QUADRATURE_STEPS = 1024
MONOTONE_RTOL = 1e-6
ROBUSTNESS_ATOL = 1e-9
MINORANT_ATOL = 1e-8
TRACE_RTOL = 1e-8

# text formats
FLOAT_FORMAT = ".17g"
PGM_MAXVAL = 255

METHODS = ("spca", "l2p", "pca")

# the w = 1 baseline gets the inner-step budget of a full self-paced fit
L2P_MAX_ITER = INNER_MAX * OUTER_ITERS

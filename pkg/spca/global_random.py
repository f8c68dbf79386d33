import numpy as np


class GlobalRandom:
    """Seeded generator shared by one pipeline stage.

    Every stage that draws random numbers (synthetic data, occlusion, split,
    random initialization) builds its own instance from its stage seed, so a
    stage's output depends only on that seed.
    """

    def __init__(self, seed=42):
        self.current_seed = seed
        self.random = np.random.default_rng(seed)

    def seed(self, seed):
        self.current_seed = seed
        self.random = np.random.default_rng(seed)

    def get_current_seed(self):
        return self.current_seed

    def integers(self, low, high):
        # high is exclusive
        return int(self.random.integers(low, high))

    def sample(self, population, k):
        return self.random.choice(population, size=k, replace=False)

    def uniform(self, size):
        return self.random.uniform(0.0, 1.0, size=size)

    def standard_normal(self, size):
        return self.random.standard_normal(size)

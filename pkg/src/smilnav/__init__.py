"""smilnav: shared multi-headed imitation learning for indoor navigation.

Subpackages: ndnet (differentiable network core), policy (architectures),
world (2D simulator), expert (demonstrators + noise injection), augment,
trainer, harness, cli.
"""

__version__ = "0.1.0"

from .generator import (ROW_TYPES, ConfigError, ForwardTrace, Generator, GeneratorConfig,
                        NonFiniteError, build_generator, parameter_table, unflatten)
from .gradients import (GradCheck, NonFiniteGradientError, check_gradients, finite_difference,
                        gradients, relative_error)
from .layers import BiGRU, GRUWeights, IndexMismatchError, bigru_forward, max_pool, max_unpool
from .optim import RMSprop, rmsprop_step
from .checkpoint import load_into, read_checkpoint, save_checkpoint

__all__ = [
    "ROW_TYPES",
    "ConfigError",
    "ForwardTrace",
    "Generator",
    "GeneratorConfig",
    "NonFiniteError",
    "build_generator",
    "parameter_table",
    "unflatten",
    "GradCheck",
    "NonFiniteGradientError",
    "check_gradients",
    "finite_difference",
    "gradients",
    "relative_error",
    "BiGRU",
    "GRUWeights",
    "IndexMismatchError",
    "bigru_forward",
    "max_pool",
    "max_unpool",
    "RMSprop",
    "rmsprop_step",
    "load_into",
    "read_checkpoint",
    "save_checkpoint",
]

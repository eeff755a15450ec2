from ._promptgate import (
    PromptgateError,
    __version__,
    generate_synthetic,
    l2_normalize,
    run_experiment,
    split_budget,
    validate_config,
)

__all__ = [
    "PromptgateError",
    "__version__",
    "generate_synthetic",
    "l2_normalize",
    "run_experiment",
    "split_budget",
    "validate_config",
]

from .api import (
    simulate,
    reconstruct,
    run_simulate,
    run_reconstruct,
    run_study,
    run_evaluate,
)
from .config import ExperimentConfig, read_config
from .version import __version__

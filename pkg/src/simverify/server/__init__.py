from .app import create_app
from .config import ServerConfig, load_server_config
from .ledger import (
    BudgetExceededError,
    DatasetStore,
    LedgerError,
    RegisteredDataset,
    UnknownDatasetError,
)

__all__ = [
    "create_app",
    "ServerConfig",
    "load_server_config",
    "DatasetStore",
    "RegisteredDataset",
    "LedgerError",
    "UnknownDatasetError",
    "BudgetExceededError",
]

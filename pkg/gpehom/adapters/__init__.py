from .base import BaseResultStore, ExecutionResult
from .filesystem_store import FilesystemResultStore

__all__ = ["FilesystemResultStore", "BaseResultStore", "ExecutionResult"]

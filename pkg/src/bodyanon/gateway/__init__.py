"""HTTP gateway and service configuration."""

from .config import ServiceConfig, config_from_dict, load_config
from .service import create_app
from .store import ImageStore, Job, JobStore, NotFoundError

__all__ = ["ServiceConfig", "config_from_dict", "load_config", "create_app",
           "ImageStore", "Job", "JobStore", "NotFoundError"]

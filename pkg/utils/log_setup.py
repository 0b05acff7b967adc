"""
Logging Setup
File + console logging configured from the 'logging' block of experiment_config.json
"""
import os
import logging
from typing import Dict, Any, Optional

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logging(log_config: Optional[Dict[str, Any]] = None,
                  log_name: str = 'noisy_knn.log',
                  level: Optional[str] = None) -> logging.Logger:
    """
    Setup logging configuration

    Args:
        log_config: The 'logging' config block (level, log_dir, to_file)
        log_name: File name inside log_dir
        level: Level override (e.g. from --log-level)

    Returns:
        Root logger
    """
    log_config = log_config or {}
    level_name = (level or log_config.get('level', 'INFO')).upper()
    if not hasattr(logging, level_name):
        raise ValueError(f"Unknown log level: {level_name}")

    handlers = [logging.StreamHandler()]

    if log_config.get('to_file', True):
        log_dir = log_config.get('log_dir', 'logs')
        if not os.path.exists(log_dir):
            os.makedirs(log_dir, exist_ok=True)
        handlers.append(logging.FileHandler(os.path.join(log_dir, log_name), encoding='utf-8'))

    logging.basicConfig(
        level=getattr(logging, level_name),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True
    )

    return logging.getLogger()

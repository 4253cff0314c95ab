"""
Logger setup for the simulator.
"""
import logging
from logging.handlers import RotatingFileHandler
from pathlib import Path

from app.config import Config


def setup_logger(app_name: str = 'app') -> logging.Logger:
    """
    Set up simulator logging with the following features:
    - Logs to both file and console
    - Uses rotating file handler to manage log file size
    - Includes timestamp, log level, and message
    - Creates log directory if it doesn't exist

    Calling it twice does not stack handlers.
    """
    logger = logging.getLogger(app_name)
    logger.setLevel(logging.DEBUG)

    if getattr(logger, '_stealthsim_configured', False):
        return logger

    log_format = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    if Config.LOG_TO_FILE:
        log_dir = Path(Config.LOG_DIR)
        log_dir.mkdir(parents=True, exist_ok=True)
        log_file = log_dir / 'stealthsim.log'

        file_handler = RotatingFileHandler(
            log_file,
            maxBytes=10000000,  # 10MB
            backupCount=5
        )
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(log_format)
        logger.addHandler(file_handler)

    console_handler = logging.StreamHandler()
    console_handler.setLevel(getattr(logging, Config.LOG_LEVEL, logging.INFO))
    console_handler.setFormatter(log_format)
    logger.addHandler(console_handler)

    logger._stealthsim_configured = True
    return logger

import os

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


class Config:
    DATA_DIR = os.environ.get('STEALTHSIM_DATA_DIR', 'data')
    SCENARIO_DIR = os.path.join(DATA_DIR, 'scenarios')

    # Logging
    LOG_DIR = os.environ.get('STEALTHSIM_LOG_DIR', 'logs')
    LOG_LEVEL = os.environ.get('STEALTHSIM_LOG_LEVEL', 'INFO').upper()
    LOG_TO_FILE = os.environ.get('STEALTHSIM_LOG_TO_FILE', 'true').lower() == 'true'

    # Trace retention: off | summary | full
    TRACE_LEVEL = os.environ.get('STEALTHSIM_TRACE_LEVEL', 'summary').lower()

    # Suite runner
    SUITE_JOBS = int(os.environ.get('STEALTHSIM_SUITE_JOBS', 1))

    # Model-vs-simulation comparisons
    DEFAULT_TOLERANCE = float(os.environ.get('STEALTHSIM_TOLERANCE', 0.25))

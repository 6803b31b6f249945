# Import required modules
import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

LOGGING_NAME = os.getenv('LOGGING_NAME')
ICTD_LOG_LEVEL = os.getenv('ICTD_LOG_LEVEL', 'INFO')

ICTD_OUT_DIR = os.getenv('ICTD_OUT_DIR', 'runs')
ICTD_WORKERS = os.getenv('ICTD_WORKERS')

import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# API settings
API_HOST = os.getenv("API_HOST", "0.0.0.0")
API_PORT = int(os.getenv("API_PORT", "9040"))
API_WORKERS = int(os.getenv("API_WORKERS", "2"))

# Worker pools
SWEEP_MAX_WORKERS = int(os.getenv("SWEEP_MAX_WORKERS", "4"))
MC_MAX_WORKERS = int(os.getenv("MC_MAX_WORKERS", "4"))
MC_BATCH_SIZE = int(os.getenv("MC_BATCH_SIZE", "250"))

# Files
VARIANCE_CACHE_PATH = os.getenv("VARIANCE_CACHE_PATH", ".cache/variance_cache.jsonl")
OUTPUT_DIR = os.getenv("OUTPUT_DIR", "results")

# Provenance
CODE_VERSION = os.getenv("CODE_VERSION", "0.1.0")

# Logging settings
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")

__all__ = [
    'API_HOST',
    'API_PORT',
    'API_WORKERS',
    'SWEEP_MAX_WORKERS',
    'MC_MAX_WORKERS',
    'MC_BATCH_SIZE',
    'VARIANCE_CACHE_PATH',
    'OUTPUT_DIR',
    'CODE_VERSION',
    'LOG_LEVEL',
]

import logging
import uvicorn
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse

from app.routers import sweeps
from app.config.experiment import emit_defaults
from app.config.settings import API_HOST, API_PORT, API_WORKERS, CODE_VERSION, LOG_LEVEL
from app.database.variance_store import get_variance_store

# Setup logging
logging_level = getattr(logging, LOG_LEVEL.upper(), logging.INFO)
logging.basicConfig(
    level=logging_level,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

# Create FastAPI app
app = FastAPI(
    title="Fluid-Antenna Full-Duplex Network API",
    description="Analytical and Monte Carlo outage and sum-rate sweeps for fluid-antenna full-duplex cellular networks",
    version=CODE_VERSION
)

# Add CORS middleware
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(sweeps.router)


@app.get("/")
async def root():
    return {
        "message": "Fluid-antenna full-duplex network sweeps",
        "endpoints": {
            "sweep": "/sweeps",
            "compare": "/sweeps/compare",
            "defaults": "/defaults",
            "health": "/health"
        }
    }


@app.get("/health")
def health_check():
    """
    Health check endpoint for monitoring

    Returns:
        dict: Status, code version and variance cache size
    """
    store = get_variance_store()
    return {
        "status": "healthy",
        "variance_cache": {"path": store.path, "records": len(store)},
        "version": CODE_VERSION
    }


@app.get("/defaults", response_class=PlainTextResponse)
def defaults():
    """Default configuration as a KEY=VALUE file."""
    return emit_defaults()


if __name__ == "__main__":
    logger.info(f"Starting server on {API_HOST}:{API_PORT} with {API_WORKERS} workers")
    uvicorn.run(
        "main:app",
        host=API_HOST,
        port=API_PORT,
        workers=API_WORKERS,
        reload=False
    )

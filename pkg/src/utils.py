import hashlib
import json
import os

from dotenv import load_dotenv

load_dotenv()

DEFAULT_TOL = 1e-9
DEFAULT_BASE = -0.25
DEFAULT_RADIUS = 0.25
OUTER_RADIUS = 10.0

SNAP_TOL = float(os.getenv("NONABCOH_SNAP_TOL", "1e-12"))
LOG_LEVEL = os.getenv("NONABCOH_LOG_LEVEL", "WARNING").upper()


def thread_cap() -> int:
    """Worker thread cap from NONABCOH_THREADS; 1 means run inline."""
    raw = os.getenv("NONABCOH_THREADS", "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def fingerprint(payload) -> str:
    """Deterministic sha256 of a JSON-serialisable payload."""
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()


def fingerprint_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()

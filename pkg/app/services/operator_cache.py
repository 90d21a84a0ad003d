"""
Operator Cache for the fcflow solver
Keeps FC operators keyed by line length and filter settings so every subpatch
line of a given length shares one immutable operator.
"""
import threading
from typing import Any, Dict, Optional, Tuple

from loguru import logger

from app.core.config import Settings, settings
from app.services.fc_core import FcOperator, build_fc_operator

OperatorKey = Tuple[int, int, int, float, int]


class BaseOperatorCache:
    """Base cache interface"""

    def get(self, n_points: int) -> FcOperator:
        raise NotImplementedError

    def clear(self) -> int:
        raise NotImplementedError

    def get_stats(self) -> Dict[str, Any]:
        raise NotImplementedError


class InMemoryOperatorCache(BaseOperatorCache):
    """
    In-memory operator cache

    Features:
    - Builds each operator once per (N, n_cont, filter params)
    - Safe to share between worker threads
    - Lost on process restart (rebuild cost is a few milliseconds per size)
    """

    def __init__(self, config: Settings):
        """
        Initialize the cache

        Args:
            config: Settings providing n_cont, filter and fit constants
        """
        self.config = config
        self._operators: Dict[OperatorKey, FcOperator] = {}
        self._lock = threading.Lock()
        self.stats = {"hits": 0, "misses": 0, "size": 0}
        logger.debug(
            f"Operator cache initialized (n_cont={config.fc_n_cont}, "
            f"filter 2p={config.fc_filter_order}, smear 2p={config.fc_smear_order})"
        )

    def _key(self, n_points: int) -> OperatorKey:
        cfg = self.config
        return (
            n_points,
            cfg.fc_n_cont,
            cfg.fc_filter_order,
            float(cfg.fc_filter_alpha),
            cfg.fc_smear_order,
        )

    def get(self, n_points: int) -> FcOperator:
        """Return the operator for lines of ``n_points`` samples, building it on a miss."""
        key = self._key(n_points)
        with self._lock:
            operator = self._operators.get(key)
            if operator is not None:
                self.stats["hits"] += 1
                return operator
            self.stats["misses"] += 1
            cfg = self.config
            operator = build_fc_operator(
                n_points,
                n_cont=cfg.fc_n_cont,
                filter_order=cfg.fc_filter_order,
                filter_alpha=cfg.fc_filter_alpha,
                smear_order=cfg.fc_smear_order,
                oversampling=cfg.fc_oversampling,
                fit_modes=cfg.fc_fit_modes,
                fit_tolerance=cfg.fc_fit_tolerance,
            )
            self._operators[key] = operator
            self.stats["size"] = len(self._operators)
        logger.debug(f"Built FC operator for N={n_points}")
        return operator

    def clear(self) -> int:
        """Drop all cached operators"""
        with self._lock:
            count = len(self._operators)
            self._operators.clear()
            self.stats["size"] = 0
        logger.info(f"Operator cache cleared - {count} entries removed")
        return count

    def get_stats(self) -> Dict[str, Any]:
        """Get cache statistics"""
        total = self.stats["hits"] + self.stats["misses"]
        return {
            "cache_type": "In-Memory",
            "cache_hits": self.stats["hits"],
            "cache_misses": self.stats["misses"],
            "total_requests": total,
            "hit_rate_percentage": round(self.stats["hits"] / total * 100, 2) if total else 0.0,
            "cached_operators": self.stats["size"],
        }


# Global cache instances, one per distinct settings object
_cache_instances: Dict[int, InMemoryOperatorCache] = {}
_instances_lock = threading.Lock()


def get_operator_cache(config: Optional[Settings] = None) -> InMemoryOperatorCache:
    """
    Get or create the operator cache for ``config`` (global settings by default)

    Returns:
        Shared cache instance
    """
    config = config or settings
    with _instances_lock:
        cache = _cache_instances.get(id(config))
        if cache is None or cache.config is not config:
            cache = InMemoryOperatorCache(config)
            _cache_instances[id(config)] = cache
        return cache


def clear_operator_cache() -> int:
    """
    Clear every operator cache

    Returns:
        Number of entries cleared
    """
    with _instances_lock:
        caches = list(_cache_instances.values())
    return sum(cache.clear() for cache in caches)

import os

from config.config import get_parameter


class CacheManager:
    """Memoises per-window transforms during a scoring sweep."""

    def __init__(self, enabled: bool = None):
        if enabled is None:
            env = os.getenv("TRANSFORM_CACHE_ENABLED")
            if env is not None:
                enabled = env.lower() == "true"
            else:
                enabled = bool(get_parameter("cache.enabled", True))
        if enabled:
            from cache.memory_cache import MemoryCache

            self.cache = MemoryCache(max_entries=int(get_parameter("cache.max_entries", 4096)))
        else:
            from cache.memory_cache import NullCache

            self.cache = NullCache()

    def get(self, key):
        return self.cache.get(key)

    def set(self, key, value):
        self.cache.set(key, value)

    def get_or_compute(self, key, compute):
        value = self.cache.get(key)
        if value is None:
            value = compute()
            self.cache.set(key, value)
        return value

    def clear(self):
        self.cache.clear()

    @property
    def stats(self):
        return {"entries": len(self.cache), "hits": self.cache.hits, "misses": self.cache.misses}

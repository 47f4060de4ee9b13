from collections import OrderedDict


class MemoryCache:
    def __init__(self, max_entries: int = 4096):
        self._store = OrderedDict()
        self.max_entries = max_entries
        self.hits = 0
        self.misses = 0

    def get(self, key):
        if key not in self._store:
            self.misses += 1
            return None
        self.hits += 1
        self._store.move_to_end(key)
        return self._store[key]

    def set(self, key, value):
        self._store[key] = value
        self._store.move_to_end(key)
        while len(self._store) > self.max_entries:
            self._store.popitem(last=False)

    def clear(self):
        self._store.clear()

    def __len__(self):
        return len(self._store)


class NullCache:
    hits = 0
    misses = 0

    def get(self, key):
        return None

    def set(self, key, value):
        pass

    def clear(self):
        pass

    def __len__(self):
        return 0

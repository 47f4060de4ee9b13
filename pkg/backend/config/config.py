import yaml
import os

config = None
_MISSING = object()

path = os.path.dirname(__file__)


with open(f"{path}/configuration.yaml", "rb") as stream:
    config = yaml.safe_load(stream)


def get_parameter(property_path: str, default=_MISSING):
    path_arr = property_path.split(".")
    value = config
    for name in path_arr:
        if not isinstance(value, dict) or name not in value:
            if default is not _MISSING:
                return default
            raise KeyError(f"Missing configuration parameter: {property_path}")
        value = value[name]
    return value


def load_run_file(file_path: str) -> dict:
    """Read a user run-config file.

    Accepts flat ``key=value`` lines or a YAML mapping. Values are typed with
    ``yaml.safe_load`` so ``1,3,5`` and ``true`` come back as list and bool.
    """
    with open(file_path, "r", encoding="utf-8") as f:
        text = f.read()

    lines = [
        ln.strip()
        for ln in text.splitlines()
        if ln.strip() and not ln.strip().startswith("#")
    ]
    if lines and all("=" in ln for ln in lines):
        values = {}
        for ln in lines:
            key, raw = ln.split("=", 1)
            raw = raw.strip()
            if "," in raw and not raw.startswith("["):
                raw = f"[{raw}]"
            values[key.strip().replace("-", "_")] = yaml.safe_load(raw)
        return values

    loaded = yaml.safe_load(text) or {}
    if not isinstance(loaded, dict):
        raise ValueError(f"Run config [{file_path}] must be a mapping of keys to values")
    return {str(k).replace("-", "_"): v for k, v in loaded.items()}

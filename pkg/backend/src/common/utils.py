import os
import json
import time
import functools
from typing import Callable, Any
from contextlib import contextmanager
from chardet import detect
from src.common.logger import get_logger


logger = get_logger("utils")


def create_folder_if_not_exists(folder_path: str, folder_name: str = "output"):
    try:
        if folder_path and not os.path.exists(folder_path):
            os.makedirs(folder_path, exist_ok=True)
    except Exception as e:
        raise ValueError(f"Cannot create {folder_name} folder [{folder_path}]! Error: {e}")


def detect_encoding(raw_data: bytes) -> str:
    result = detect(raw_data[:65536])
    encoding = result["encoding"]
    return encoding or "utf-8"


def read_text_file(file_path: str) -> str:
    """Read a text file whatever its encoding (exports from other tools vary)."""
    try:
        with open(file_path, "rb") as f:
            raw_data = f.read()
    except OSError as e:
        logger.error(f"Failed to read file: {file_path}", e)
        raise ValueError(f"Cannot read file [{file_path}]: {e}")
    if not raw_data:
        return ""
    return raw_data.decode(detect_encoding(raw_data))


def write_text_file(file_path: str, text: str) -> str:
    create_folder_if_not_exists(os.path.dirname(file_path))
    try:
        with open(file_path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as e:
        logger.error(f"Failed to write file: {file_path}", e)
        raise ValueError(f"Cannot write file [{file_path}]: {e}")
    return file_path


def save_to_json(data, file_path: str, indent=2) -> str:
    return write_text_file(file_path, json.dumps(data, ensure_ascii=False, indent=indent) + "\n")


def timed_method(func: Callable) -> Callable:
    @functools.wraps(func)
    def wrapper(*args, **kwargs) -> Any:
        start_time = time.perf_counter()
        result = func(*args, **kwargs)
        elapsed = time.perf_counter() - start_time
        logger.info(f"TIMING: {func.__qualname__} executed in {elapsed:.4f} seconds")
        return result

    return wrapper


@contextmanager
def timed_block(name: str):
    start_time = time.perf_counter()
    try:
        yield
    finally:
        elapsed = time.perf_counter() - start_time
        logger.info(f"TIMING: {name} executed in {elapsed:.4f} seconds")

"""Bundled instance documents."""

from importlib import resources


def bundled_path(name: str) -> str:
    """Filesystem path of a bundled instance document, e.g. 'example4'."""
    if not name.endswith(".json"):
        name += ".json"
    return str(resources.files(__package__).joinpath(name))

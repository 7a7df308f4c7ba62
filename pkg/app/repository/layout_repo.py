import json
import os
from pathlib import Path
from typing import Any, Tuple

from pydantic import ValidationError

from app.domain.schema.layout_schema import LayoutManifest
from app.utils.exceptions.exceptions import ManifestError, NotFoundError


def _wrap_return(result: Any) -> Tuple[Any, None]:
    return result, None
def _wrap_error(e: Exception) -> Tuple[None, Exception]:
    return None, e


class LayoutRepository:
    """
    Layout manifests persisted as JSON beside the block image.
    """

    def save(self, layout: LayoutManifest, path: str | os.PathLike):
        try:
            Path(path).write_text(json.dumps(layout.model_dump(mode="json"), indent=2))
            return _wrap_return(Path(path))
        except Exception as e:
            return _wrap_error(e)

    def load(self, path: str | os.PathLike):
        """
        Read and validate a layout manifest.

        Returns:
            LayoutManifest: The parsed layout.
        """
        try:
            path = Path(path)
            if not path.exists():
                return None, NotFoundError(detail=f"Layout manifest {path} not found")
            return _wrap_return(LayoutManifest.model_validate_json(path.read_text()))
        except ValidationError as e:
            return None, ManifestError(detail="Invalid layout manifest", data=str(e))
        except Exception as e:
            return _wrap_error(e)

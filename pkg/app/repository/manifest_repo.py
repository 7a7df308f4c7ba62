import json
import os
from pathlib import Path
from typing import Any, Tuple

from pydantic import ValidationError

from app.domain.schema.manifest_schema import MANIFEST_FORMAT_VERSION, TrustedManifest
from app.utils.exceptions.exceptions import ManifestError, NotFoundError


def _wrap_return(result: Any) -> Tuple[Any, None]:
    return result, None
def _wrap_error(e: Exception) -> Tuple[None, Exception]:
    return None, e


class ManifestRepository:
    """
    Trusted manifests persisted as versioned JSON documents.
    """

    def save(self, manifest: TrustedManifest, path: str | os.PathLike):
        try:
            path = Path(path)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(manifest.model_dump(mode="json"), indent=2, sort_keys=True))
            return _wrap_return(path)
        except Exception as e:
            return _wrap_error(e)

    def load(self, path: str | os.PathLike):
        """
        Read and validate a trusted manifest.

        Returns:
            TrustedManifest: The parsed manifest.
        """
        try:
            path = Path(path)
            if not path.exists():
                return None, NotFoundError(detail=f"Trusted manifest {path} not found")
            raw = json.loads(path.read_text())
            version = raw.get("format_version") if isinstance(raw, dict) else None
            if version != MANIFEST_FORMAT_VERSION:
                return None, ManifestError(detail=f"Unsupported manifest format version {version}")
            return _wrap_return(TrustedManifest.model_validate(raw))
        except (ValidationError, json.JSONDecodeError) as e:
            return None, ManifestError(detail="Invalid trusted manifest", data=str(e))
        except Exception as e:
            return _wrap_error(e)

from fastapi import APIRouter, Depends, status

from app.domain.schema.manifest_schema import ManifestBuildRequest
from app.domain.schema.responseSchema import ManifestBuildResponse
from app.service.manifest_service import ManifestService, get_manifest_service

# Manifest router
manifest_router = APIRouter(
    prefix="/manifests",
    tags=["manifest"]
)

@manifest_router.post(
    "/build",
    response_model=ManifestBuildResponse,
    status_code=status.HTTP_201_CREATED,
    summary="Build a trusted manifest",
    description="Hash the media files and opaque container components of a published corpus.",
)
def build_manifest(
    request: ManifestBuildRequest,
    manifest_service: ManifestService = Depends(get_manifest_service)
):
    """
    Build and write a trusted manifest.

    - **corpus_dir**: Directory holding the clean, published files
    - **out_path**: Output JSON path
    - **media_extensions**: Optional override of the configured media extensions
    """
    manifest = manifest_service.build(request.corpus_dir, request.media_extensions)
    path = manifest_service.save(manifest, request.out_path)
    return {
        "detail": "Manifest built successfully",
        "data": {
            "path": str(path),
            "files": len(manifest.file_hashes),
            "components": len(manifest.component_hashes),
            "skipped": len(manifest.skipped),
        },
    }

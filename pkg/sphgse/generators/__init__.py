"""Writers for JSON and CSV result artifacts."""

from sphgse.generators.artifact_writer import (
    ArtifactWriter,
    atomic_write,
    render_csv,
    render_json,
    table_rows,
)

__all__ = ["ArtifactWriter", "atomic_write", "render_csv", "render_json", "table_rows"]

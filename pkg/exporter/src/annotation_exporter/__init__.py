"""Export plain text to the annotation JSON schema.

The schema (one file = one document set) is the interchange format the
graph-construction library ingests:

    {"documents": [{"doc_id": str,
                    "sentences": [{"tokens": [...], "dependencies": [...]}],
                    "coref_chains": [[{"sentence": int, "start": int, "end": int}]]}]}

Dependency head -1 marks the sentence root; coreference spans use the
set-wide sentence numbering.
"""

from annotation_exporter.export import ExporterConfig, export, export_documents
from annotation_exporter.pipeline import PipelineUnavailableError, RulePipeline, get_pipeline

__version__ = "0.1.0"

__all__ = ["ExporterConfig", "export", "export_documents",
           "PipelineUnavailableError", "RulePipeline", "get_pipeline", "__version__"]

from app.utils.corpus.builder import DOCUMENT_FORMATS, MIXED_FORMATS, build_corpus, mixed_corpus, package_file

__all__ = ["DOCUMENT_FORMATS", "MIXED_FORMATS", "build_corpus", "mixed_corpus", "package_file"]

"""corpusforge: collaborative text-annotation platform for producing
gold-standard corpora (BioC in/out, multi-annotator rounds, agreement
scoring, final-corpus export)."""

__version__ = "0.1.0"

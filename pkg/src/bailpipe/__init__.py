"""Batch pipeline for Hindi district-court bail orders.

Stages: clean/filter -> anonymize -> segment -> extract -> lexical stats ->
summarize -> split -> train -> evaluate.  Every rule the pipeline applies
(header pivots, phrase regexes, decision tokens, gazetteers, number words)
lives in external config files; the code only implements the machinery.
"""

__version__ = "0.1.0"

"""patchscout: silent vulnerability-fix commit identification.

Pipeline: parse (or ingest) the before/after ASTs of a commit, merge them
into an annotated change graph, embed node content with skip-gram vectors,
extract structural features with a graph attention network, and classify
fixing vs. non-fixing.
"""

__version__ = "0.1.0"

"""Knowledge-graph curation benchmark toolkit.

Builds triple-classification datasets from an OBO ontology, trains
embedding-based tree ensembles with token-selection adaptations, and runs
few-shot prompting experiments against chat-completion endpoints.
"""

__version__ = "0.1.0"

"""flowequiv: decide whether two versions of a dataflow DAG produce equivalent
sink results by decomposing the pair into verifier-sized windows."""

from .edits import (EditMapping, Transformation, apply_transformation,
                    derive_edits_from_mapping, edit_units, enumerate_mappings)
from .ev import EvDescriptor, Truth, Verdict, canonical_ev
from .model import (Link, OpKind, Operator, OpProps, Semantics, Workflow,
                    attach_virtual_boundaries, induced_subdag, validate_workflow)
from .oracle import oracle_ev
from .orchestrate import VerifyConfig, VerifyResult, verify
from .symbolic import quick_inequivalence, summarize_version
from .tables import Table, tables_equal
from .windows import VersionPair, Window, make_window
from .interp import evaluate

__all__ = [
    "EditMapping", "Transformation", "apply_transformation",
    "derive_edits_from_mapping", "edit_units", "enumerate_mappings",
    "EvDescriptor", "Truth", "Verdict", "canonical_ev", "oracle_ev",
    "Link", "OpKind", "Operator", "OpProps", "Semantics", "Workflow",
    "attach_virtual_boundaries", "induced_subdag", "validate_workflow",
    "VerifyConfig", "VerifyResult", "verify",
    "quick_inequivalence", "summarize_version",
    "Table", "tables_equal", "VersionPair", "Window", "make_window", "evaluate",
]

__version__ = "0.1.0"

"""aclwright: conflict-aware ACL configuration from natural-language intents.

The pipeline runs in three stages: intent comprehension (a chat backend
translates operator text into a structured intermediate representation
grounded in the network mapping table), conflict detection against existing
ACLs (truly-matched-flow analysis plus interface-path validation), and
deployment planning (covering optimization that minimizes rule additions).
"""

__version__ = "0.1.0"

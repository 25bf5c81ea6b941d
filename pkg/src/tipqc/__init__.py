"""Bi-track data engine for bubble/no-bubble pipette-tip image QC.

Modules: fixtures (procedural renderer), gate (image quality gate),
scorer (linear posterior + class-balanced loss), router (confidence
routing + review queue), synth (prompted batch generation + consistency
filter), manifest/curator (dataset ledger + preparation), evaluate
(metrics + mixing ablation), service (HTTP shell), cli.
"""

__version__ = "0.1.0"

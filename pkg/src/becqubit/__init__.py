"""Mean-field torsion qubit of a two-mode rotating condensate.

Submodules:

* :mod:`becqubit.qubit` -- pure states, Bloch vectors, overlaps, trace distance
* :mod:`becqubit.meanfield` -- nonlinear equation of motion, rotations, flow fields
* :mod:`becqubit.fock` -- exact two-mode many-body model and the mean-field model error
* :mod:`becqubit.protocols` -- torsion state discrimination (simple and Childs-Young)
* :mod:`becqubit.cli` -- batch command-line harness
"""

from .qubit import BlochVector, QubitAmplitudes, from_bloch, overlap, to_bloch, trace_distance
from .meanfield import ControlSchedule, EffectiveParams, Segment, integrate, step
from .fock import FockVector, TwoModeParams, encode_cat, encode_fn, evolve_exact, model_error
from .protocols import InputPair, Scheme, run_discrimination, run_trials

__all__ = [
    "BlochVector", "QubitAmplitudes", "from_bloch", "overlap", "to_bloch", "trace_distance",
    "ControlSchedule", "EffectiveParams", "Segment", "integrate", "step",
    "FockVector", "TwoModeParams", "encode_cat", "encode_fn", "evolve_exact", "model_error",
    "InputPair", "Scheme", "run_discrimination", "run_trials",
]

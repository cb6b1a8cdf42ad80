"""Hand-written ill-typed programs and the error class each must raise."""
from qfpc.errors import (BangBodyUsesLinear, FreeTypeVariable, LinearVariableReused,
                         LinearVariableUnused, NotUnitType, TypeMismatch, UnboundVariable)

VIOLATIONS = [
    ("unbound", "x", UnboundVariable),
    ("unbound_in_bang", "bang y", UnboundVariable),
    ("qubit_dropped", "(lam q:qubit. ()) new", LinearVariableUnused),
    ("pair_half_dropped", "let a (*) b = new (*) new in match meas a with inl u -> u | inr v -> v",
     LinearVariableUnused),
    ("branch_drops_qubit",
     "(lam q:qubit. match meas new with inl u -> (u; match meas q with inl a -> a | inr b -> b)"
     " | inr v -> v) new", LinearVariableUnused),
    ("qubit_cloned", "(lam q:qubit. match meas (U[CNOT] (q (*) q)) with inl u -> u | inr v -> v) new",
     LinearVariableReused),
    ("qubit_measured_twice",
     "(lam q:qubit. (match meas q with inl u -> u | inr v -> v); "
     "(match meas q with inl u -> u | inr v -> v)) new", LinearVariableReused),
    ("linear_in_bang", "(lam q:qubit. der[!unit] (bang (match meas q with inl u -> u | inr v -> v))) new",
     BangBodyUsesLinear),
    ("linear_fn_in_bang", "(lam f:unit -o unit. der[!unit] (bang (f ()))) (lam x:unit. x)",
     BangBodyUsesLinear),
    ("seq_non_unit", "new; ()", TypeMismatch),
    ("apply_non_function", "() ()", TypeMismatch),
    ("wrong_argument", "(lam x:unit. x) new", TypeMismatch),
    ("der_on_non_bang", "der[!unit] ()", TypeMismatch),
    ("program_not_unit", "lam x:qubit. x", NotUnitType),
    ("free_type_variable", "(lam x:X. ()) ()", FreeTypeVariable),
]

"""Tensor norm bounds along the Werner family and for a few fixed states."""
import numpy as np

from qfpc.norms import bell_state, qprime_tensor_norm_lb, qprime_tensor_norm_ub


def main():
    b = bell_state()
    B = np.outer(b, b.conj()) if b.ndim == 1 else b
    print(f"{'p':>6}{'lower':>12}{'upper':>12}")
    for p in np.linspace(0, 1, 11):
        z = p * B + (1 - p) * np.eye(4) / 4
        lb, _ = qprime_tensor_norm_lb(z)
        ub, _ = qprime_tensor_norm_ub(z, steps=50)
        print(f"{p:>6.2f}{lb:>12.6f}{ub:>12.6f}")
    # separable below p = 1/3; the upper bound certifies one exactly there


if __name__ == "__main__":
    main()

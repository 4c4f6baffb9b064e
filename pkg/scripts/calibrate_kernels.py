"""Recompute the kernel-grid tolerance constant.

Run once; copy the printed value into cantorflow/config.py.
"""
import math

from cantorflow.kernels import CHECKED, kernel_errors

N = 32
errs = kernel_errors(N)
worst = max(errs[k] * N for k in CHECKED)
print(f"largest err * N at N={N}: {worst:.4f}")
print(f"KERNEL_TOLERANCE_C = {math.ceil(2 * worst * 10) / 10}")

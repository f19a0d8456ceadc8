"""Print the regularized one-site kernels against their unit-circle limits.

For each q the table shows the quadrature value of the smooth kernel at
several regularization weights and the error against exp(-|q|/2); the
error column should shrink monotonically down each row.  The marked-site
column shows the delta-family mass concentrating (its q = 0 value is
1/(1-beta^2)) while the family width (1-beta^2)/beta closes.
"""

import argparse

import numpy as np

from cfverify.cayley import delta_family_width, phase_average_kernels


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--betas", type=float, nargs="+",
                        default=[0.9, 0.99, 0.999])
    parser.add_argument("--qs", type=float, nargs="+",
                        default=[0.0, 0.5, 1.0, 2.0, 4.0])
    args = parser.parse_args()

    print(f"{'q':>5s}  {'beta':>6s}  {'width':>9s}  {'delta':>12s}  "
          f"{'kernel':>12s}  {'limit':>12s}  {'error':>9s}")
    for q in args.qs:
        limit = float(np.exp(-abs(q) / 2.0))
        for beta in args.betas:
            kernels = phase_average_kernels(q, beta)
            err = abs(kernels.cauchy_kernel_value - limit)
            print(f"{q:5.2f}  {beta:6.3f}  {delta_family_width(beta):9.3e}  "
                  f"{kernels.delta_family_value:12.6f}  "
                  f"{kernels.cauchy_kernel_value:12.9f}  {limit:12.9f}  "
                  f"{err:9.2e}")
        print()


if __name__ == "__main__":
    main()

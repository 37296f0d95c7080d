"""Solve an LP-format model with highspy and write a HiGHS raw solution file.

usage: highs_solve.py MODEL SOLUTION TIME_LIMIT
"""
import sys

import highspy


def main():
    model, solution, limit = sys.argv[1], sys.argv[2], float(sys.argv[3])
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("time_limit", max(limit, 1e-3))
    h.setOptionValue("mip_rel_gap", 0.0)
    h.setOptionValue("mip_abs_gap", 1e-9)
    h.setOptionValue("threads", 1)
    if h.readModel(model) == highspy.HighsStatus.kError:
        sys.exit("cannot read " + model)
    h.run()
    h.writeSolution(solution, 0)
    info = h.getInfo()
    print("Model status:", h.modelStatusToString(h.getModelStatus()))
    print("Dual bound:", info.mip_dual_bound)


if __name__ == "__main__":
    main()

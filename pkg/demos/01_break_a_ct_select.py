"""Watch an optimizer break a branchless select.

The fig1c pattern computes `sec ? ra : rb` with xor/neg/and masking, which
is safe on any target.  Pattern recognition rewrites the mask dance into a
select; on x86-64 that select becomes a cmov and stays safe, but on a
target without cmov it becomes a branch on the secret.
"""

from ctlab import (
    PROFILES,
    compare_traces,
    execute,
    gen_inputs,
    load_program,
    lower,
    preset,
    print_ir,
    run_pipeline,
)


def analyze(name: str, preset_name: str):
    p = preset(preset_name)
    mid, _ = run_pipeline(load_program(name), p.spec)
    low, _ = lower(mid, PROFILES[p.spec.backend], p.spec.cmov_conversion)
    inputs = gen_inputs(low, count=16, seed=0)
    traces = [execute(low, a) for a in inputs.arg_dicts()]
    report = compare_traces(traces, low.function().id_to_loc())
    return low, report


def main():
    print("source:")
    print(print_ir(load_program("fig1c_ctselect")))

    for preset_name in ("baseline-off", "llvm18-O3", "i386-O3"):
        low, report = analyze("fig1c_ctselect", preset_name)
        verdict = ("constant-time" if report.is_clean
                   else "NOT constant-time")
        print(f"== {preset_name}: {verdict}")
        for f in report.findings:
            print(f"   {f.kind} at {f.loc} (id {f.instr})")
        if preset_name == "i386-O3":
            print("lowered form on i386:")
            print(print_ir(low))


if __name__ == "__main__":
    main()

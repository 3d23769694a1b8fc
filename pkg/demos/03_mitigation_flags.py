"""Check a mitigation flag set before trusting it.

The `*-mitig` presets model builds with the branch-introducing transforms
disabled by flag.  Verifying them against the corpus shows the full LLVM
set keeps every constant-time entry clean, while the variant that keeps
the loop vectorizer still breaks the runtime-bound lookup.
"""

from ctlab import (
    PROFILES,
    compare_traces,
    emit_real_flags,
    entries,
    execute,
    gen_inputs,
    load_program,
    lower,
    preset,
    run_pipeline,
)


def verdicts(preset_name: str) -> dict[str, bool]:
    p = preset(preset_name)
    out = {}
    for entry in entries():
        if not entry.ct_expected:
            continue
        mid, _ = run_pipeline(load_program(entry.name), p.spec)
        low, _ = lower(mid, PROFILES[p.spec.backend], p.spec.cmov_conversion)
        inputs = gen_inputs(low, count=16, seed=0)
        traces = [execute(low, a) for a in inputs.arg_dicts()]
        out[entry.name] = compare_traces(
            traces, low.function().id_to_loc()).is_clean
    return out


def main():
    print("flags for a mitigated LLVM build:")
    print(" ", " ".join(emit_real_flags("llvm")))
    print("flags for a mitigated GCC build:")
    print(" ", " ".join(emit_real_flags("gcc")))
    print()
    for preset_name in ("llvm18-O3-mitig", "llvm18-O3-mitig+vect",
                        "gcc13-O3-mitig"):
        clean = verdicts(preset_name)
        broken = [n for n, ok in clean.items() if not ok]
        print(f"{preset_name}: {len(clean) - len(broken)}/{len(clean)} "
              f"constant-time entries stay clean"
              + (f"; broken: {', '.join(broken)}" if broken else ""))


if __name__ == "__main__":
    main()

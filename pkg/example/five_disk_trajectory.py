"""Play UBM OPLB on the five-disk set and plot the mean-policy trajectory.

The disk layout is illustrative; see the five_disks preset.
"""

from cclb.harness import emit_plots, load_preset, run_experiment, with_overrides


def main():
    config = with_overrides(load_preset("five_disks"), output_dir="runs/five-disks")
    artifacts = run_experiment(config)
    print(artifacts.summary)
    for path in emit_plots(config):
        print(path)


if __name__ == "__main__":
    main()

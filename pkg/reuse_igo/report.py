"""
Re-aggregation of persisted trial tables.

Loads any number of trials.csv files, groups the trials by configuration and
reports success probability, mean evaluations over successful runs and the
performance metric per group.
"""

import logging
import os

import numpy as np
import pandas as pd

from .harness import CONFIG_COLUMNS, TRIAL_COLUMNS

logger = logging.getLogger(__name__)


class ResultsReport:
    def __init__(self, paths):
        """Initialize the report with trials.csv files or directories holding one."""
        self.paths = [os.path.join(p, "trials.csv") if os.path.isdir(p) else p for p in paths]
        self.trials = pd.DataFrame(columns=TRIAL_COLUMNS)
        self.table = None
        self.load_trials()

    def load_trials(self):
        """Load every trial table; unreadable files are reported and skipped."""
        print("Loading trial tables...")
        frames = []
        for path in self.paths:
            try:
                frame = pd.read_csv(path)
            except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
                print(f"✗ Error loading {path}: {e}")
                continue
            missing = set(TRIAL_COLUMNS) - set(frame.columns)
            if missing:
                print(f"✗ {path} lacks columns: {', '.join(sorted(missing))}")
                continue
            frames.append(frame)
            print(f"✓ Loaded {path} ({len(frame)} trials)")
        if frames:
            self.trials = pd.concat(frames, ignore_index=True)
        return self.trials

    def aggregate(self):
        """One row per configuration with the success and performance statistics."""
        if self.trials.empty:
            self.table = pd.DataFrame(
                columns=CONFIG_COLUMNS + ["trials", "successes", "success_probability", "mean_evals_success", "performance_metric"]
            )
            return self.table

        # eta is empty for continuous runs; keep those groups
        success = self.trials["success"].astype(bool)
        trials = self.trials.assign(success=success, success_evals=self.trials["evaluations"].where(success))
        table = (
            trials.groupby(CONFIG_COLUMNS, dropna=False, sort=True)
            .agg(
                trials=("success", "size"),
                successes=("success", "sum"),
                mean_evals_success=("success_evals", "mean"),
            )
            .reset_index()
        )
        table["success_probability"] = table["successes"] / table["trials"]
        table["performance_metric"] = np.where(
            table["successes"] > 0, table["mean_evals_success"] / table["success_probability"], np.nan
        )
        self.table = table
        logger.info("aggregated %d trial(s) into %d configuration(s)", len(trials), len(table))
        return table

    def print_report(self):
        print("\n" + "=" * 60)
        print("EXPERIMENT REPORT")
        print("=" * 60)
        if self.table is None:
            self.aggregate()
        if self.table.empty:
            print("No trials loaded")
            return

        print(f"\n  Configurations: {len(self.table)}")
        print(f"  Trials: {int(self.table['trials'].sum()):,}")
        for _, row in self.table.iterrows():
            label = f"{row['function']} d={row['d']} {row['variant']} lambda={row['lambda']} K={row['K']}"
            if pd.notna(row["eta"]):
                label += f" eta={row['eta']:.6g}"
            if pd.isna(row["performance_metric"]):
                print(f"  {label}: 0/{row['trials']} successful")
            else:
                print(
                    f"  {label}: {row['successes']}/{row['trials']} successful, "
                    f"performance {row['performance_metric']:,.1f}"
                )

    def export(self, out_path):
        if self.table is None:
            self.aggregate()
        out_dir = os.path.dirname(out_path)
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)
        self.table.to_csv(out_path, index=False)
        print(f"\nReport saved to {out_path}")
        return out_path

    def run_report(self, out_path):
        """Aggregate, print and export."""
        self.aggregate()
        self.print_report()
        return self.export(out_path)

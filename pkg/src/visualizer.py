import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np

from .errors import TraceError


class TrackingVisualizer:
    def __init__(self, figsize=(10, 5)):
        self.figsize = figsize

    def emit_svg(self, traces, path, title=None):
        """Overlay of target and measured force against time, one measured line per trace."""
        traces = list(traces)
        if not traces or any(len(t) == 0 for t in traces):
            raise TraceError(f"no samples to plot for {path}")
        fig, ax = plt.subplots(figsize=self.figsize)
        ax.plot(traces[0].time, traces[0].target, color='black', linestyle='--', linewidth=1.2, label='Target force')
        for i, t in enumerate(traces):
            ax.plot(t.time, t.measured, linewidth=0.9, alpha=0.85, label=f'Measured (replicate {i + 1})')
        ax.set_title(title or traces[0].name or 'Force tracking')
        ax.set_xlabel('Time (s)')
        ax.set_ylabel('Force (N)')
        ax.grid(True, linestyle=':', alpha=0.4)
        ax.legend(loc='upper right', fontsize=8)
        self._save(fig, path)
        return path

    def plot_force_distribution(self, rows, path):
        """
        Box plot of the pooled measured force per scenario, with each target
        marked; rows need traces attached (run_matrix(keep_traces=True)).
        """
        rows = [r for r in rows if r.ok and r.traces]
        if not rows:
            raise TraceError(f"no traces to summarise for {path}")
        data = [np.concatenate([t.measured for t in r.traces]) for r in rows]
        fig, ax = plt.subplots(figsize=(max(6, 0.7 * len(rows) + 2), 5))
        ax.boxplot(data, showfliers=False)
        ax.scatter(range(1, len(rows) + 1), [r.target_force for r in rows], marker='_', s=300,
                   color='crimson', label='Target', zorder=3)
        ax.set_xticks(range(1, len(rows) + 1))
        ax.set_xticklabels([r.name for r in rows], rotation=60, ha='right', fontsize=7)
        ax.set_ylabel('Force (N)')
        ax.set_title('Force tracking distribution')
        ax.legend(loc='upper left')
        ax.grid(True, axis='y', linestyle=':', alpha=0.4)
        self._save(fig, path)
        return path

    @staticmethod
    def _save(fig, path):
        try:
            fig.tight_layout()
            fig.savefig(path, format='svg')
        except OSError as exc:
            raise OSError(exc.errno, f"cannot write {path}: {exc.strerror or exc}", path) from exc
        finally:
            plt.close(fig)

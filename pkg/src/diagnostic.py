import numpy as np


class ContactDiagnostic:
    """Peak and contact-loss analysis of one trace (sudden-movement comparison)."""

    def __init__(self, trace, target, loss_threshold=0.1):
        self.trace = trace
        self.target = target
        self.threshold = loss_threshold

    def _lost(self):
        """
        Samples below the loss threshold once contact has first been made.
        The approach before the first contact sample is not a loss.
        """
        measured = self.trace.measured
        in_contact = measured >= self.threshold
        if not in_contact.any():
            return np.ones(len(measured), dtype=bool)
        lost = ~in_contact
        lost[:int(np.argmax(in_contact))] = False
        return lost

    def contact_loss_duration(self):
        """Total time with measured force below the loss threshold after first contact."""
        return float(np.count_nonzero(self._lost()) * self.trace.sample_period)

    def longest_loss_episode(self):
        lost = self._lost().astype(np.int8)
        if not lost.any():
            return 0.0
        # Run lengths of consecutive True samples
        edges = np.diff(np.concatenate(([0], lost, [0])))
        starts, stops = np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)
        return float((stops - starts).max() * self.trace.sample_period)

    def detect_contributions(self):
        measured = self.trace.measured
        return {
            "peak_force_N": round(float(measured.max()), 3),
            "min_force_N": round(float(measured.min()), 3),
            "overshoot_N": round(float(measured.max()) - self.target, 3),
            "contact_loss_s": round(self.contact_loss_duration(), 3),
            "longest_loss_s": round(self.longest_loss_episode(), 3),
        }

from dataclasses import dataclass


@dataclass
class GradientCheckReport:
    max_rel_error: float
    worst_coordinate: tuple
    n_checked: int
    tolerance: float

    @property
    def passed(self):
        return self.max_rel_error < self.tolerance


def relative_error(analytic, numeric, floor=1e-6):
    """``|a - n| / max(|a|, |n|, floor)``; the floor keeps near-zero coordinates from dominating."""
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)

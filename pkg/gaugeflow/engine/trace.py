from enum import Enum, auto


class TraceStatus(Enum):
    RUNNING = auto()
    CONVERGED = auto()  # ‖grad‖ fell below grad_tol·‖grad₀‖
    MAX_ITERS = auto()
    STALLED = auto()  # no decrease even along the plain gradient after a moment reset


class Trace:
    """Per-iteration energy, gradient norm and step of one optimizer run."""

    def __init__(self, energy0: float, grad_norm0: float, label: str = ""):
        self.label = label
        self.status = TraceStatus.RUNNING
        self.energy0 = energy0
        self.grad_norm0 = grad_norm0
        self.energies: list[float] = []
        self.grad_norms: list[float] = []
        self.steps: list[float] = []
        self.final_grad_norm = grad_norm0
        self.extras: dict[str, float] = {}

    def __len__(self):
        return len(self.energies)

    def append(self, energy: float, grad_norm: float, step: float):
        self.energies.append(energy)
        self.grad_norms.append(grad_norm)
        self.steps.append(step)
        self.final_grad_norm = grad_norm

    def finish(self, status: TraceStatus):
        self.status = status

    @property
    def iterations(self) -> int:
        return len(self.energies)

    @property
    def converged(self) -> bool:
        return self.status == TraceStatus.CONVERGED

    @property
    def is_finished(self) -> bool:
        return self.status != TraceStatus.RUNNING

    @property
    def best_energy(self) -> float:
        return min([self.energy0, *self.energies])

    def rows(self) -> list[tuple[int, float, float, float]]:
        """(iter, energy, grad_norm, step); iteration 0 is the starting point."""
        head = [(0, self.energy0, self.grad_norm0, 0.0)]
        return head + [(i + 1, e, g, s) for i, (e, g, s) in enumerate(zip(self.energies, self.grad_norms, self.steps))]

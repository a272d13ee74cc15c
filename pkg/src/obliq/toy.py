"""Single-qubit oblivious application of T^y by two non-communicating servers.

The user masks the input with a random ZX Pauli and uploads it to server A
together with two uniform phase queries. Server A applies its queried phases,
Bell-measures the qubit against its half of a shared Bell pair, and reports
the outcome. The user re-randomizes the queries so that server B's phases
telescope with server A's to exactly T^y, and undoes the masks on the qubit
it gets back.
"""

from dataclasses import dataclass, field

import numpy as np

from .harness import (
    BranchRecord,
    BranchSource,
    ChannelRegistry,
    ClassicalPart,
    PartyView,
    StepMessage,
)
from .layers import apply_masked_t_layer, apply_zx
from .qsim import StateRegister


@dataclass
class ToyResult:
    y: int
    output_density: np.ndarray
    transcript: object
    ledger: object
    branch_records: list
    mask_x: int
    mask_z: int
    outcome: tuple
    views: dict = field(default_factory=dict)


def rederive_queries(q, mask_x, outcome_x):
    """The second-round queries from the first, given the Bell X outcome.

    Index arithmetic is mod 2, values mod 8; the derived pair telescopes the
    two servers' phase exponents to y on the unmasked component.
    """
    qp = [0, 0]
    qp[(mask_x + outcome_x) % 2] = (1 - q[mask_x % 2]) % 8
    qp[(mask_x + outcome_x + 1) % 2] = (-q[(mask_x + 1) % 2]) % 8
    return tuple(qp)


def run_toy(y, psi, rng=None, seed=None, force_masks=None, force_branch=None):
    """One protocol run; returns the corrected output density and the run record.

    `force_masks` fixes (mask_x, mask_z); `force_branch` postselects the Bell
    outcome (a, b). Unforced choices come from `rng` (or a fresh stream
    seeded with `seed`).
    """
    y = int(y) % 8
    psi = np.asarray(psi, dtype=np.complex128).reshape(-1)
    if psi.size != 2:
        raise ValueError("the toy protocol transfers a single qubit")
    if rng is None:
        rng = np.random.default_rng(seed)

    registry = ChannelRegistry()
    registry.register("user", "server-a")
    registry.register("user", "server-b")
    views = {p: PartyView(p) for p in ("user", "server-a", "server-b")}
    branch_records = []
    source = BranchSource([force_branch] if force_branch is not None else None)

    reg = StateRegister()

    # step 0: the servers share one Bell pair
    half_a, half_b = reg.alloc_bell_pair()

    # step 1: mask the input, send it to server A with two uniform queries
    if force_masks is not None:
        mask_x, mask_z = int(force_masks[0]) % 2, int(force_masks[1]) % 2
    else:
        mask_x, mask_z = int(rng.integers(0, 2)), int(rng.integers(0, 2))
    q = (int(rng.integers(0, 8)), int(rng.integers(0, 8)))
    (data,) = reg.alloc_state(psi)
    apply_zx(reg, data, mask_x, mask_z)
    msg = StepMessage(
        "step-1", "user", ("server-a",),
        (ClassicalPart("t-query", 3, q),), qubits=1,
    )
    registry.send(msg)
    views["server-a"].absorb(msg)

    # step 2: server A applies its queried phases and Bell-measures
    apply_masked_t_layer(reg, [data], {0: (q[0],), 1: (q[1],)}, (y,))
    a1, b1, probs = reg.bell_measure(data, half_a, rng=rng, force=source.next_force())
    branch_records.append(BranchRecord("step-2", 1, probs, (a1, b1)))
    msg = StepMessage(
        "step-2", "server-a", ("user",),
        (ClassicalPart("bell-x", 1, (a1,)), ClassicalPart("bell-z", 1, (b1,))),
    )
    registry.send(msg)
    views["user"].absorb(msg)

    # step 3: rederived queries go to server B
    qp = rederive_queries(q, mask_x, a1)
    msg = StepMessage(
        "step-3", "user", ("server-b",),
        (ClassicalPart("t-query-rederived", 3, qp),),
    )
    registry.send(msg)
    views["server-b"].absorb(msg)

    # step 4: server B applies the rederived phases and returns the qubit
    apply_masked_t_layer(reg, [half_b], {0: (qp[0],), 1: (qp[1],)}, (y,))
    msg = StepMessage("step-4", "server-b", ("user",), qubits=1)
    registry.send(msg)
    views["user"].absorb(msg)

    # step 5: undo the masks (local)
    apply_zx(reg, half_b, (mask_x + a1) % 2, (mask_z + b1) % 2)

    return ToyResult(
        y=y,
        output_density=reg.density_on([half_b]),
        transcript=registry.transcript,
        ledger=registry.ledger,
        branch_records=branch_records,
        mask_x=mask_x,
        mask_z=mask_z,
        outcome=(a1, b1),
        views=views,
    )

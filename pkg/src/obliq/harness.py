"""Run plumbing shared by the protocols.

Covers message records with exact wire sizes, the upload/download ledger,
channel registration with structural non-communication between servers,
branch-outcome forcing, and the secrecy/complexity audits.
"""

import hashlib
import itertools
from dataclasses import dataclass, field

import numpy as np

from .gates import matrix_of
from .qsim import pure_density, trace_distance


class ChannelError(RuntimeError):
    pass


def is_server(name):
    return name.startswith("server")


def is_user(name):
    return name.startswith("user")


@dataclass(frozen=True)
class ClassicalPart:
    """One residue vector on the wire: `width` bits per entry."""

    name: str
    width: int
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        if self.width not in (1, 2, 3):
            raise ValueError("entry width must be 1, 2 or 3 bits")
        top = 1 << self.width
        for v in self.values:
            if not 0 <= v < top:
                raise ValueError(f"{self.name}: value {v} exceeds width {self.width}")

    @property
    def bits(self):
        return self.width * len(self.values)


@dataclass(frozen=True)
class StepMessage:
    step: str
    sender: str
    receivers: tuple
    parts: tuple = ()
    qubits: int = 0

    @property
    def bits(self):
        return sum(p.bits for p in self.parts)

    @property
    def kind(self):
        if self.qubits and self.parts:
            return "mixed"
        return "quantum" if self.qubits else "classical"

    def digest(self):
        h = hashlib.sha256()
        for p in self.parts:
            h.update(p.name.encode())
            h.update(bytes([p.width]))
            h.update(",".join(str(v) for v in p.values).encode())
        h.update(str(self.qubits).encode())
        return h.hexdigest()[:16]


@dataclass
class TranscriptRecord:
    seq: int
    message: StepMessage

    def render(self):
        m = self.message
        receiver = "+".join(m.receivers)
        return (
            f"{self.seq} {m.step} {m.sender} {receiver} "
            f"{m.kind} {m.bits} {m.qubits} {m.digest()}"
        )


class Transcript:
    def __init__(self):
        self.records = []

    def record(self, message):
        self.records.append(TranscriptRecord(len(self.records) + 1, message))

    def render(self):
        return "\n".join(r.render() for r in self.records) + "\n"

    def step_labels(self):
        return [r.message.step for r in self.records]

    def column_sums(self):
        """(upload bits, upload qubits, download bits, download qubits)."""
        ub = uq = db = dq = 0
        for r in self.records:
            m = r.message
            if is_user(m.sender):
                ub += m.bits
                uq += m.qubits
            else:
                db += m.bits
                dq += m.qubits
        return ub, uq, db, dq


@dataclass(frozen=True)
class ParsedRecord:
    seq: int
    step: str
    sender: str
    receivers: tuple
    kind: str
    bits: int
    qubits: int
    digest: str


def parse_transcript(text):
    out = []
    for line in text.splitlines():
        if not line.strip():
            continue
        seq, step, sender, receiver, kind, bits, qubits, digest = line.split()
        out.append(
            ParsedRecord(
                int(seq), step, sender, tuple(receiver.split("+")),
                kind, int(bits), int(qubits), digest,
            )
        )
    for i, rec in enumerate(out):
        if rec.seq != i + 1:
            raise ValueError(f"sequence numbers not strictly increasing at {rec.seq}")
    return out


@dataclass
class ComplexityLedger:
    upload_bits: int = 0
    upload_qubits: int = 0
    download_bits: int = 0
    download_qubits: int = 0

    def add(self, message):
        if is_user(message.sender):
            self.upload_bits += message.bits
            self.upload_qubits += message.qubits
        elif is_server(message.sender):
            self.download_bits += message.bits
            self.download_qubits += message.qubits
        else:
            raise ValueError(f"unknown party {message.sender!r}")

    def totals(self):
        return (
            self.upload_bits, self.upload_qubits,
            self.download_bits, self.download_qubits,
        )

    def matches_transcript(self, transcript):
        return self.totals() == transcript.column_sums()


class ChannelRegistry:
    """Known communication edges; a server-to-server edge cannot be built."""

    def __init__(self):
        self._edges = set()
        self.transcript = Transcript()
        self.ledger = ComplexityLedger()

    def register(self, a, b):
        if is_server(a) and is_server(b):
            raise ChannelError(f"servers may not communicate: {a} <-> {b}")
        self._edges.add(frozenset((a, b)))

    def has_edge(self, a, b):
        return frozenset((a, b)) in self._edges

    def send(self, message):
        for r in message.receivers:
            if not self.has_edge(message.sender, r):
                raise ChannelError(f"no channel {message.sender} -> {r}")
        self.transcript.record(message)
        self.ledger.add(message)


@dataclass
class PartyView:
    """What one party has seen: received classical parts and qubit counts."""

    name: str
    received: list = field(default_factory=list)
    received_qubits: int = 0

    def absorb(self, message):
        for p in message.parts:
            self.received.append((message.step, p.name, p.values))
        self.received_qubits += message.qubits


@dataclass(frozen=True)
class BranchRecord:
    step: str
    qubit_slot: int
    probs: tuple
    outcome: tuple


class BranchSource:
    """Hands out forced Bell outcomes, or None to sample honestly."""

    def __init__(self, plan=None):
        self._iter = iter(plan) if plan is not None else None
        self.forced = plan is not None

    def next_force(self):
        if self._iter is None:
            return None
        try:
            return next(self._iter)
        except StopIteration:
            raise ValueError("branch plan exhausted before the run finished") from None


def all_branch_plans(num_measurements):
    """Every assignment of (a, b) outcomes to the given number of measurements."""
    return itertools.product(((0, 0), (0, 1), (1, 0), (1, 1)), repeat=num_measurements)


# -- verdicts ----------------------------------------------------------------

@dataclass
class Verdict:
    name: str
    ok: bool
    details: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def __bool__(self):
        return self.ok


# -- complexity assertions ----------------------------------------------------

def expected_toqc_steps(n, m, n_circ, classical_output=False):
    """Per-step (direction, bits, qubits) table for a two-server run."""
    quantum = not classical_output
    steps = {}
    steps["step-1"] = ("up", 2 * n * n + 4 * n + (0 if quantum else n), n if quantum else 0)
    steps["step-2"] = ("down", 2 * n, 0)
    steps["step-3"] = ("up", 2 * n * n + 8 * n, 0)
    steps["step-4"] = ("down", 2 * n, 0)
    for j in range(2, m + 1):
        steps[f"step-{4 * j - 3}"] = ("up", 2 * n * n + 8 * n, 0)
        steps[f"step-{4 * j - 2}"] = ("down", 2 * n, 0)
        steps[f"step-{4 * j - 1}"] = ("up", 2 * n * n + 8 * n, 0)
        steps[f"step-{4 * j}"] = ("down", 2 * n, 0)
    steps[f"step-{4 * m + 1}"] = ("up", 4 * n, 0)
    steps[f"step-{4 * m + 2}"] = ("down", 0 if quantum else n_circ, n_circ if quantum else 0)
    return steps


def expected_tgdmqc_steps(n, m, n_circ):
    steps = expected_toqc_steps(n, m, n_circ, classical_output=True)
    # no input state to send: step 1 carries only the fresh query families
    steps["step-1"] = ("up", 2 * n * n + 4 * n, 0)
    return steps


def _check_ledger(name, ledger, expect, transcript=None, step_table=None):
    v = Verdict(name, True)
    labels = ("upload_bits", "upload_qubits", "download_bits", "download_qubits")
    for label, got, want in zip(labels, ledger.totals(), expect):
        if got != want:
            v.ok = False
            v.details.append(f"{label}: got {got}, expected {want}")
    if transcript is not None:
        if not ledger.matches_transcript(transcript):
            v.ok = False
            v.details.append("ledger does not equal the transcript column sums")
        if step_table is not None:
            seen = {}
            for rec in transcript.records:
                msg = rec.message
                b, q = seen.get(msg.step, (0, 0))
                seen[msg.step] = (b + msg.bits, q + msg.qubits)
            for step, (_, bits, qubits) in step_table.items():
                got = seen.get(step)
                if got is None:
                    v.ok = False
                    v.details.append(f"{step}: missing from the transcript")
                elif got != (bits, qubits):
                    v.ok = False
                    v.details.append(
                        f"{step}: got {got[0]} bits / {got[1]} qubits, "
                        f"expected {bits} / {qubits}"
                    )
            for step in seen:
                if step not in step_table:
                    v.ok = False
                    v.details.append(f"{step}: unexpected transcript step")
    return v


def assert_complexity_toqc(ledger, n, m, n_circ, transcript=None, classical_output=False):
    """Exact check of the run totals against the per-step accounting."""
    bits = (4 * n * n + 16 * n) * m
    if classical_output:
        expect = (bits + n, 0, 4 * n * m + n_circ, 0)
    else:
        expect = (bits, n, 4 * n * m, n_circ)
    table = expected_toqc_steps(n, m, n_circ, classical_output)
    v = _check_ledger("toqc-complexity", ledger, expect, transcript, table)
    v.notes.append(
        "headline bound (2n^2+20n)m bits + 2n qubits differs from the exact "
        "per-step totals asserted here; it is reported, not asserted"
    )
    return v


def assert_complexity_tgdmqc(ledger, n, m, n_circ, transcript=None):
    expect = ((4 * n * n + 16 * n) * m, 0, 4 * n * m + n_circ, 0)
    table = expected_tgdmqc_steps(n, m, n_circ)
    return _check_ledger("tgdmqc-complexity", ledger, expect, transcript, table)


def audit_transcript_file(text, protocol, n, m, n_circ, classical_output=False):
    """Recompute a ledger from transcript text and run the complexity check."""
    records = parse_transcript(text)
    ledger = ComplexityLedger()
    for rec in records:
        if is_user(rec.sender):
            ledger.upload_bits += rec.bits
            ledger.upload_qubits += rec.qubits
        else:
            ledger.download_bits += rec.bits
            ledger.download_qubits += rec.qubits
    if protocol == "toqc":
        return assert_complexity_toqc(ledger, n, m, n_circ, classical_output=classical_output)
    if protocol == "tgdmqc":
        return assert_complexity_tgdmqc(ledger, n, m, n_circ)
    raise ValueError(f"unknown protocol {protocol!r}")


# -- secrecy audits -----------------------------------------------------------

MASK_AVERAGE_MAX_N = 6


def audit_mask_average(psi, tol=1e-12):
    """Average the masked input over all 4^n per-qubit ZX masks.

    The average must be the maximally mixed state; that makes the uploaded
    quantum payload independent of the input.
    """
    psi = np.asarray(psi, dtype=np.complex128).reshape(-1)
    n = int(psi.size).bit_length() - 1
    if psi.size != 1 << n or n < 1:
        raise ValueError("psi must have 2^n amplitudes")
    if n > MASK_AVERAGE_MAX_N:
        raise ValueError(f"mask enumeration capped at n <= {MASK_AVERAGE_MAX_N}")
    acc = np.zeros((1 << n, 1 << n), dtype=np.complex128)
    xg, zg = matrix_of("X"), matrix_of("Z")
    for masks in itertools.product(range(4), repeat=n):
        op = np.eye(1, dtype=np.complex128)
        for msk in masks:
            a, b = msk & 1, msk >> 1
            local = (zg if b else np.eye(2)) @ (xg if a else np.eye(2))
            op = np.kron(op, local)
        v = op @ psi
        acc += np.outer(v, v.conj())
    acc /= 4**n
    dist = trace_distance(acc, np.eye(1 << n) / (1 << n))
    v = Verdict("mask-average", dist <= tol)
    v.details.append(f"trace distance to I/2^n: {dist:.3e}")
    return v


@dataclass(frozen=True)
class QueryEquationAudit:
    """One query equation with the residue ring of its uniform source.

    `derive(source, setting)` computes the on-the-wire value from one uniform
    source residue; the two settings fix every other quantity at two distinct
    protocol contexts.
    """

    name: str
    ring: int
    derive: object
    setting_a: object
    setting_b: object


def audit_query_uniformity(equation_audits, require_distinct_settings=True):
    """Enumerate each equation's source; the output marginal must be uniform
    and identical across the two settings."""
    v = Verdict("query-uniformity", True)
    for eq in equation_audits:
        if require_distinct_settings and eq.setting_a == eq.setting_b:
            v.ok = False
            v.details.append(f"{eq.name}: settings are not distinct")
            continue
        marg_a = sorted(eq.derive(q, eq.setting_a) % eq.ring for q in range(eq.ring))
        marg_b = sorted(eq.derive(q, eq.setting_b) % eq.ring for q in range(eq.ring))
        uniform = list(range(eq.ring))
        if marg_a != uniform or marg_b != uniform:
            v.ok = False
            v.details.append(f"{eq.name}: marginal not uniform over Z_{eq.ring}")
        elif marg_a != marg_b:
            v.ok = False
            v.details.append(f"{eq.name}: marginals differ between settings")
    return v


def audit_bell_uniformity(branch_records, tol=1e-12):
    """Every recorded Bell branch probability must be exactly 1/4."""
    v = Verdict("bell-uniformity", True)
    worst = 0.0
    for rec in branch_records:
        for p in rec.probs:
            worst = max(worst, abs(p - 0.25))
    if worst > tol:
        v.ok = False
    v.details.append(f"max |prob - 1/4|: {worst:.3e} over {len(branch_records)} measurements")
    return v


def mask_density_average(psi):
    """The averaged masked density itself (for equality comparisons)."""
    psi = np.asarray(psi, dtype=np.complex128).reshape(-1)
    n = int(psi.size).bit_length() - 1
    acc = np.zeros((1 << n, 1 << n), dtype=np.complex128)
    xg, zg = matrix_of("X"), matrix_of("Z")
    for masks in itertools.product(range(4), repeat=n):
        op = np.eye(1, dtype=np.complex128)
        for msk in masks:
            a, b = msk & 1, msk >> 1
            local = (zg if b else np.eye(2)) @ (xg if a else np.eye(2))
            op = np.kron(op, local)
        acc += pure_density(op @ psi)
    return acc / 4**n

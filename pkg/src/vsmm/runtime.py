"""In-process two-party execution harness with byte/round metering.

Both parties run concurrently as threads; channels are FIFO queues of framed
byte messages. Rounds are counted with a dependency rule implemented as a
logical clock: a message is stamped with the sender's clock, and a receive
advances the receiver's clock past the stamp. Two independent simultaneous
sends therefore cost one round, while a send that could only happen after a
receive starts a new round.

Payload bits are metered exactly as placed on the wire; the 6-byte framing
(4-byte little-endian length + 2-byte protocol tag) is accounted separately
so that formula assertions compare payload bits only.
"""

from __future__ import annotations

import math
import struct
import threading
import queue
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .dealer import Dealer, TapeView
from .ring import DEFAULT_CFG, FixedPointConfig

FRAME_BITS = 48  # 4-byte length + 2-byte tag per message
RECV_POLL_S = 0.02
RECV_TIMEOUT_S = 120.0


class DeadlockError(RuntimeError):
    """Both parties are blocked on a receive with no message in flight."""


class PeerFailedError(RuntimeError):
    """The other party's thread raised before sending the awaited message."""


class CommMeter:
    """Online/offline payload bits, framing overhead and round counts."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.online_bits = 0
        self.offline_bits = 0
        self.framing_bits = 0
        self.rounds = 0
        self.sections: dict[str, dict] = {}

    def _section(self, name: str) -> dict:
        return self.sections.setdefault(
            name, {"online_bits": 0, "offline_bits": 0, "rounds": 0})

    def add_online(self, bits: int, section: str) -> None:
        with self._lock:
            self.online_bits += bits
            self.framing_bits += FRAME_BITS
            self._section(section)["online_bits"] += bits

    def add_offline(self, bits: int, section: str) -> None:
        with self._lock:
            self.offline_bits += bits
            self._section(section)["offline_bits"] += bits

    def note_section_rounds(self, section: str, delta: int) -> None:
        """Per-section round cost: max over the two parties' clock deltas."""
        with self._lock:
            sec = self._section(section)
            sec["rounds"] = max(sec["rounds"], delta)

    @property
    def online_bytes(self) -> int:
        return (self.online_bits + 7) // 8

    @property
    def offline_bytes(self) -> int:
        return (self.offline_bits + 7) // 8

    def report(self, protocol: str = "", models: dict | None = None) -> dict:
        out = {
            "protocol": protocol,
            "online_bits": self.online_bits,
            "online_bytes": self.online_bytes,
            "offline_bits": self.offline_bits,
            "offline_bytes": self.offline_bytes,
            "framing_bytes": (self.framing_bits + 7) // 8,
            "rounds": self.rounds,
            "sections": {k: dict(v) for k, v in self.sections.items()},
        }
        if models:
            out["est_time_by_condition"] = {
                name: estimate_time(self, model) for name, model in models.items()}
        return out


@dataclass(frozen=True)
class NetworkModel:
    bandwidth_bps: float
    latency_s: float


NETWORK_CONDITIONS = {
    "normal": NetworkModel(800e6, 0.022e-3),
    "nb": NetworkModel(200e6, 0.022e-3),
    "hl": NetworkModel(800e6, 50e-3),
}


def estimate_time(meter: CommMeter, model: NetworkModel) -> float:
    """Analytic time: rounds * latency + transmitted bits / bandwidth."""
    bits = meter.online_bits + meter.framing_bits
    return meter.rounds * model.latency_s + bits / model.bandwidth_bps


class _Runtime:
    def __init__(self, meter: CommMeter):
        self.meter = meter
        self.queues = (queue.Queue(), queue.Queue())  # inbox per party
        self.blocked = [False, False]
        self.failed = [False, False]


class Endpoint:
    """One party's channel endpoint, carrying the logical round clock."""

    def __init__(self, runtime: _Runtime, party: int):
        self._rt = runtime
        self.party = party
        self.clock = 0
        self.sections: list[str] = []

    @property
    def section(self) -> str:
        return self.sections[0] if self.sections else "default"

    def send(self, payload: bytes, nbits: int | None = None, tag: int = 0) -> None:
        bits = len(payload) * 8 if nbits is None else nbits
        self._rt.meter.add_online(bits, self.section)
        self._rt.queues[1 - self.party].put((payload, self.clock, tag))

    def recv(self) -> bytes:
        waited = 0.0
        inbox = self._rt.queues[self.party]
        while True:
            try:
                payload, stamp, _tag = inbox.get(timeout=RECV_POLL_S)
                self._rt.blocked[self.party] = False
                self.clock = max(self.clock, stamp + 1)
                return payload
            except queue.Empty:
                self._rt.blocked[self.party] = True
                waited += RECV_POLL_S
                if self._rt.failed[1 - self.party]:
                    raise PeerFailedError("peer thread failed") from None
                if (self._rt.blocked[1 - self.party]
                        and self._rt.queues[1 - self.party].empty()
                        and inbox.empty()):
                    raise DeadlockError(
                        "both parties blocked on receive with empty channels")
                if waited >= RECV_TIMEOUT_S:
                    raise DeadlockError("receive timed out") from None


class PartyContext:
    """Everything one party's protocol code needs: channel, tapes, config."""

    def __init__(self, endpoint: Endpoint, tape, cfg: FixedPointConfig):
        self.ep = endpoint
        self.tape = tape
        self.cfg = cfg
        self.party = endpoint.party

    @contextmanager
    def section(self, name: str):
        self.ep.sections.append(name)
        self.tape.section = self.ep.section
        start = self.ep.clock
        try:
            yield
        finally:
            self.ep.sections.pop()
            self.tape.section = self.ep.section
            self.ep._rt.meter.note_section_rounds(name, self.ep.clock - start)

    # wire encodings ------------------------------------------------------

    def send_ring(self, arr: np.ndarray) -> None:
        a = np.ascontiguousarray(arr, dtype=np.uint64)
        self.ep.send(a.astype("<u8").tobytes(), nbits=64 * a.size)

    def recv_ring(self, shape) -> np.ndarray:
        payload = self.ep.recv()
        return np.frombuffer(payload, dtype="<u8").astype(np.uint64).reshape(shape)

    def send_bits(self, bits: np.ndarray) -> None:
        b = np.ascontiguousarray(bits, dtype=np.uint8).ravel()
        self.ep.send(np.packbits(b).tobytes(), nbits=b.size)

    def recv_bits(self, n: int, shape=None) -> np.ndarray:
        payload = self.ep.recv()
        bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8))[:n]
        return bits.reshape(shape) if shape is not None else bits

    def send_perm(self, indices: np.ndarray, degree: int) -> None:
        """Bit-packed permutation indices: ceil(log2 degree) bits each."""
        b = math.ceil(math.log2(degree)) if degree > 1 else 0
        idx = np.asarray(indices, dtype=np.uint64).ravel()
        if b == 0:
            self.ep.send(b"", nbits=0)
            return
        shifts = np.arange(b - 1, -1, -1, dtype=np.uint64)
        bits = ((idx[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.uint8)
        self.ep.send(np.packbits(bits.ravel()).tobytes(), nbits=idx.size * b)

    def recv_perm(self, degree: int, count: int | None = None) -> np.ndarray:
        """Receive `count` packed indices (default: degree, one permutation)."""
        count = degree if count is None else count
        b = math.ceil(math.log2(degree)) if degree > 1 else 0
        payload = self.ep.recv()
        if b == 0:
            return np.zeros(count, dtype=np.int64)
        bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8))[:count * b]
        weights = (1 << np.arange(b - 1, -1, -1, dtype=np.int64))
        return (bits.reshape(count, b).astype(np.int64) * weights).sum(axis=1)


def run_two_party(protocol, inputs0=(), inputs1=(), dealer: Dealer | None = None,
                  seed: int = 0, cfg: FixedPointConfig = DEFAULT_CFG,
                  budget: int | None = None, meter: CommMeter | None = None):
    """Run protocol(ctx, *inputs) for both parties concurrently.

    Returns (out0, out1, meter). Exceptions from either party propagate.
    """
    meter = meter if meter is not None else CommMeter()
    dealer = dealer if dealer is not None else Dealer.from_seed(seed)
    rt = _Runtime(meter)
    ctxs = []
    for party in range(2):
        tape = TapeView(dealer, party, meter=meter, budget=budget)
        ctxs.append(PartyContext(Endpoint(rt, party), tape, cfg))
    outs: list = [None, None]
    errs: list = [None, None]

    def work(party: int, args) -> None:
        try:
            outs[party] = protocol(ctxs[party], *args)
        except BaseException as exc:  # noqa: BLE001 - re-raised in the caller
            errs[party] = exc
            rt.failed[party] = True

    threads = [threading.Thread(target=work, args=(p, inp), daemon=True)
               for p, inp in ((0, inputs0), (1, inputs1))]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    for exc in errs:
        if exc is not None and not isinstance(exc, PeerFailedError):
            raise exc
    for exc in errs:
        if exc is not None:
            raise exc
    meter.rounds = max(ctxs[0].ep.clock, ctxs[1].ep.clock)
    return outs[0], outs[1], meter

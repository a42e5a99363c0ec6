"""Non-deterministic automaton executor over timestamped event streams.

One Runtime drives one automaton over one stream, single-threaded, in
arrival order. Instances are persistent partial matches: a take never moves
an instance, it spawns an extended clone, so every event may participate in
any number of matches. Window expiry is driven by stream time: before an
event at time T is processed, every instance whose window closed strictly
before T receives a synthetic timeout, and buffered events older than one
window behind T are dropped.
"""

from __future__ import annotations

import heapq
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Optional

from . import nfa as N
from .buffer import InputBuffer, iterate_fetch
from .events import Event, StreamDataError
from .metrics import Metrics
from .patterns import NegSpec
from .predicates import eval_atoms

NEG_INF = float("-inf")


@dataclass(frozen=True)
class Match:
    binding: dict  # role -> Event | tuple[Event, ...]
    detection_ts: int
    branch: int

    def key(self) -> tuple:
        return match_key(self.binding)


def match_key(binding: dict) -> tuple:
    items = []
    for role in sorted(binding):
        bound = binding[role]
        members = bound if isinstance(bound, tuple) else (bound,)
        items.append((role, tuple((e.etype, e.ts, e.seq) for e in members)))
    return tuple(items)


def match_line(m: Match) -> str:
    parts = []
    for role in sorted(m.binding):
        bound = m.binding[role]
        members = bound if isinstance(bound, tuple) else (bound,)
        parts.append(f"{role}=" + "+".join(str(e) for e in members))
    return "; ".join(parts)


class ShadowMismatch(AssertionError):
    """Shared-buffer candidates diverged from the per-instance reference."""


class Instance:
    __slots__ = ("iid", "sid", "branch", "binding", "anchor", "maxkey",
                 "theta", "alive", "tail_idx", "shadow", "spawn_key")

    def __init__(self, iid, sid, branch, binding, anchor, maxkey,
                 theta=NEG_INF, shadow=None, spawn_key=None):
        self.iid = iid
        self.sid = sid
        self.branch = branch
        self.binding = binding
        self.anchor = anchor  # min bound ts; None for the seed
        self.maxkey = maxkey  # max bound (ts, seq); None for the seed
        self.theta = theta  # deferred negation floor (first-chance checks)
        self.alive = True
        self.tail_idx = 0
        self.shadow = shadow  # per-instance buffer in paired mode
        self.spawn_key = spawn_key  # (ts, seq) of the spawning event


@dataclass(frozen=True)
class TakePlan:
    role: str
    etype: str
    dst: int
    cond: tuple
    prec_roles: frozenset
    succ_roles: frozenset
    stream_ok: bool
    branch: int
    iterate: Optional[tuple] = None  # (lo, hi, group_attr)
    append: bool = False  # eager accumulation self-loop
    iter_first: bool = False  # eager first bind of the iterated role
    req_iter_min: Optional[tuple] = None  # (iterated role, lo) gate


@dataclass(frozen=True)
class AcceptPlan:
    gates: Optional[tuple]  # (lo, hi, iter_atoms) for eager completion
    tail: tuple  # negative tail triples (sid, NegSpec, wait)
    grow: bool
    fc_at_f: dict  # branch -> checks that run on reaching acceptance


@dataclass(frozen=True)
class NegPlan:
    index: int
    kill_map: dict  # etype -> tuple[NegSpec] for arrivals while waiting


@dataclass(frozen=True)
class StatePlan:
    kind: str
    entry_takes: tuple
    stream_takes: dict  # etype -> tuple[TakePlan]
    fc_checks: tuple
    accept: Optional[AcceptPlan]
    neg: Optional[NegPlan]
    store_types: frozenset


def _compile_plans(nfa: N.Nfa) -> list:
    storable = nfa.storable
    takes_by_src: dict = defaultdict(list)
    stores_by_src: dict = defaultdict(set)
    for e in nfa.edges:
        if e.action in (N.TAKE, N.ITERATE):
            takes_by_src[e.src].append(e)
        elif e.action == N.STORE:
            stores_by_src[e.src] |= set(e.types)

    plans = []
    for st in nfa.states:
        entry, stream = [], defaultdict(list)
        fc: tuple = ()
        neg_plan = None
        accept_plan = None
        branch_of_state = st.branch

        for e in takes_by_src.get(st.sid, ()):
            if e.dst == nfa.rejecting:
                continue  # negation reject edges run as checks, not takes
            bi = e.branch if e.branch is not None else (branch_of_state or 0)
            branch = nfa.branches[bi]
            chain = branch.chain
            role_of_type = branch.role_of_type
            etype = next(iter(e.types))
            req = None
            it = chain.iterated
            if (nfa.label == "eager" and it is not None and e.role != it.role
                    and it.role in chain.prec_of(e.role)):
                req = (it.role, it.lo)
            tp = TakePlan(
                role=e.role,
                etype=etype,
                dst=e.dst,
                cond=e.cond,
                prec_roles=frozenset(role_of_type[t] for t in e.prec),
                succ_roles=frozenset(role_of_type[t] for t in e.succ),
                stream_ok=not e.succ,
                branch=bi,
                iterate=((e.bounds[0], e.bounds[1], e.group_by)
                         if e.action == N.ITERATE else None),
                append=(e.src == e.dst),
                iter_first=(e.action == N.TAKE and it is not None
                            and e.role == it.role and e.src != e.dst),
                req_iter_min=req,
            )
            if tp.stream_ok:
                stream[tp.etype].append(tp)
            if not tp.append and (set(e.types) & storable):
                entry.append(tp)

        if st.kind == N.CHAIN and st.branch is not None:
            branch = nfa.branches[st.branch]
            fc = branch.fc_checks.get(st.sid, ())
            if branch.complete_state == st.sid and branch.tail:
                accept_plan = AcceptPlan(
                    gates=branch.eager_gates,
                    tail=branch.tail,
                    grow=branch.chain.iterated is not None,
                    fc_at_f=(),
                )
        if st.kind == N.ACCEPT:
            gates = None
            grow = False
            fc_at_f: dict = {}
            for bi, branch in enumerate(nfa.branches):
                checks = branch.fc_checks.get(st.sid, ())
                if checks:
                    fc_at_f[bi] = tuple(checks)
                if branch.complete_state == st.sid:
                    gates = branch.eager_gates
                    grow = (branch.chain.iterated is not None
                            and any(tp.append for tps in stream.values()
                                    for tp in tps))
            accept_plan = AcceptPlan(gates=gates, tail=(), grow=grow,
                                     fc_at_f=fc_at_f)
        if st.kind == N.NEG:
            branch = nfa.branches[st.branch]
            idx = next(i for i, (sid, _, _) in enumerate(branch.tail)
                       if sid == st.sid)
            kill: dict = defaultdict(list)
            for sid, spec, wait in branch.tail[idx:]:
                if wait:
                    kill[spec.etype].append(spec)
            neg_plan = NegPlan(index=idx,
                               kill_map={t: tuple(v) for t, v in kill.items()})

        plans.append(StatePlan(
            kind=st.kind,
            entry_takes=tuple(entry),
            stream_takes={t: tuple(v) for t, v in stream.items()},
            fc_checks=fc,
            accept=accept_plan,
            neg=neg_plan,
            store_types=frozenset(stores_by_src.get(st.sid, ())),
        ))
    return plans


class Runtime:
    """Single-threaded executor; feed events in arrival order, then flush."""

    def __init__(self, nfa: N.Nfa, metrics: Optional[Metrics] = None,
                 paired_buffers: bool = False, branch_offset: int = 0):
        self.nfa = nfa
        self.window = nfa.window
        self.branch_offset = branch_offset
        self.metrics = metrics if metrics is not None else Metrics()
        self.plans = _compile_plans(nfa)
        group_attrs = {}
        for b in nfa.branches:
            it = b.chain.iterated
            if it is not None and it.group_by is not None:
                group_attrs[it.etype] = it.group_by
        self.buffer = InputBuffer(group_attrs)
        self.storable = nfa.storable
        self.paired = paired_buffers
        self.live: dict = {}
        self.by_state: dict = defaultdict(dict)
        self.heap: list = []
        self._next_iid = 0
        self._pending: list = []
        self._last_key = None
        self._last_seq = None
        self.watermark = None
        # Which states care about which arriving types.
        interest = defaultdict(set)
        for sid, plan in enumerate(self.plans):
            for t in plan.stream_takes:
                interest[t].add(sid)
            if plan.neg is not None:
                for t in plan.neg.kill_map:
                    interest[t].add(sid)
        self.type_interest = {t: sorted(s) for t, s in interest.items()}
        seed = self._new_instance(nfa.initial, None, {}, None, None, NEG_INF,
                                  shadow={} if paired_buffers else None)
        self.seed = seed

    # -- instance bookkeeping ------------------------------------------------

    def _new_instance(self, sid, branch, binding, anchor, maxkey, theta,
                      shadow=None, spawn_key=None) -> Instance:
        iid = self._next_iid
        self._next_iid += 1
        inst = Instance(iid, sid, branch, binding, anchor, maxkey, theta,
                        shadow, spawn_key)
        self.live[iid] = inst
        self.by_state[sid][iid] = inst
        self.metrics.instance_create += 1
        if len(self.live) > self.metrics.peak_live_instances:
            self.metrics.peak_live_instances = len(self.live)
        if anchor is not None:
            heapq.heappush(self.heap, (anchor + self.window, iid))
        return inst

    def _retire(self, inst: Instance) -> None:
        inst.alive = False
        self.live.pop(inst.iid, None)
        self.by_state[inst.sid].pop(inst.iid, None)
        self.metrics.instance_retire += 1

    def _move(self, inst: Instance, sid: int) -> None:
        self.by_state[inst.sid].pop(inst.iid, None)
        inst.sid = sid
        self.by_state[sid][inst.iid] = inst

    def _emit(self, inst: Instance, detection_ts: int) -> None:
        self._pending.append(Match(dict(inst.binding), detection_ts,
                                   (inst.branch or 0) + self.branch_offset))
        self.metrics.matches += 1

    # -- stream driving ------------------------------------------------------

    def step(self, e: Event) -> list:
        if self._last_key is not None and (e.key <= self._last_key
                                           or e.seq <= self._last_seq):
            raise StreamDataError(f"stream out of order at {e}")
        self._last_key, self._last_seq = e.key, e.seq
        self.metrics.events_processed += 1
        self._pending = []
        self._fire_timeouts(e.ts)
        self.metrics.buffer_remove += self.buffer.expire(e.ts - self.window)
        self.watermark = e.ts - self.window
        if self.paired:
            for inst in list(self.live.values()):
                if e.etype in self.plans[inst.sid].store_types:
                    inst.shadow.setdefault(e.etype, []).append(e)
        if e.etype in self.storable:
            self.buffer.store(e)
            self.metrics.buffer_insert += 1
        # Snapshot before dispatch: instances spawned while this event is
        # being processed must not observe the event themselves.
        targets = []
        for sid in self.type_interest.get(e.etype, ()):
            insts = self.by_state.get(sid)
            if insts:
                targets.extend(insts.values())
        for inst in targets:
            if inst.alive:
                self._on_arrival(inst, e)
        return self._drain()

    def flush(self) -> list:
        self._pending = []
        self._fire_timeouts(None)
        return self._drain()

    def _drain(self) -> list:
        out = self._pending
        self._pending = []
        out.sort(key=lambda m: (m.detection_ts, m.key()))
        return out

    def _fire_timeouts(self, now_ts: Optional[int]) -> None:
        while self.heap and (now_ts is None or self.heap[0][0] < now_ts):
            deadline, iid = heapq.heappop(self.heap)
            inst = self.live.get(iid)
            if inst is None or not inst.alive:
                continue
            plan = self.plans[inst.sid]
            if plan.kind == N.NEG:
                # All pending absence checks were already verified against
                # the buffer at completion time and against every arrival
                # since; window expiry certifies the remaining ones.
                self._emit(inst, deadline)
            self._retire(inst)

    # -- arrivals ------------------------------------------------------------

    def _on_arrival(self, inst: Instance, e: Event) -> None:
        plan = self.plans[inst.sid]
        if plan.kind == N.NEG:
            for chk in plan.neg.kill_map.get(e.etype, ()):
                if self._candidate_ok(inst, chk, e):
                    self._retire(inst)
                    return
            return
        for tp in plan.stream_takes.get(e.etype, ()):
            if not inst.alive:
                return
            self._stream_take(inst, tp, e)

    def _stream_take(self, inst: Instance, tp: TakePlan, e: Event) -> None:
        if tp.append:
            members = inst.binding[tp.role]
            lo, hi, group = self._iter_spec(tp)
            if hi is not None and len(members) >= hi:
                return
            if group is not None and members and e.attr(group) != members[0].attr(group):
                return
            if not self._fits_window(inst, e.ts, e.ts):
                return
            self._spawn(inst, tp, members + (e,), e)
            return
        if tp.iterate is not None:
            self._iterate_candidates(inst, tp, new_event=e)
            return
        lower = self._lower_bound(inst, tp.prec_roles)
        if lower is not None and not e.key > lower:
            return
        if not self._fits_window(inst, e.ts, e.ts):
            return
        if tp.req_iter_min is not None:
            role, lo = tp.req_iter_min
            if len(inst.binding[role]) < lo:
                return
        if tp.cond:
            binding = dict(inst.binding)
            binding[tp.role] = e
            if not eval_atoms(tp.cond, binding, self.metrics):
                return
        self._spawn(inst, tp, (e,) if tp.iter_first else e, e)

    # -- buffer searches -----------------------------------------------------

    def _entry(self, inst: Instance) -> None:
        plan = self.plans[inst.sid]
        if plan.kind == N.ACCEPT:
            self._accept(inst, plan)
            return
        if plan.kind == N.NEG:
            self._tail_entry(inst, plan)
            return
        for chk in plan.fc_checks:
            if not inst.alive:
                return
            if self._fc_scan(inst, chk):
                return
        if plan.accept is not None:
            if self._complete_eager(inst, plan.accept):
                return
        for tp in plan.entry_takes:
            if not inst.alive:
                return
            self._entry_search(inst, tp)

    def _entry_search(self, inst: Instance, tp: TakePlan) -> None:
        if tp.iterate is not None:
            self._iterate_candidates(inst, tp, new_event=None)
            return
        lower = self._lower_bound(inst, tp.prec_roles)
        upper = self._upper_bound(inst, tp.succ_roles)
        self.metrics.buffer_search += 1
        cands = self.buffer.query(tp.etype, lower, upper)
        if self.paired:
            self._shadow_check(inst, tp, lower, upper, cands)
        for x in cands:
            if not self._fits_window(inst, x.ts, x.ts):
                continue
            if tp.cond:
                binding = dict(inst.binding)
                binding[tp.role] = x
                if not eval_atoms(tp.cond, binding, self.metrics):
                    continue
            self._spawn(inst, tp, (x,) if tp.iter_first else x, x)
        # An empty result with a succeeding-type bound is a failed search;
        # on a positive chain there is no matching edge, so the instance
        # simply stays (it can no longer advance and expires with its window).

    def _iterate_candidates(self, inst: Instance, tp: TakePlan,
                            new_event: Optional[Event]) -> None:
        lo, hi, group = self._iter_spec(tp)
        lower = self._lower_bound(inst, tp.prec_roles)
        upper = self._upper_bound(inst, tp.succ_roles)
        self.metrics.buffer_search += 1
        subsets = iterate_fetch(
            self.buffer, tp.etype, lower, upper, (lo, hi),
            group_attr=group, new_event=new_event, condition=tp.cond,
            bound_roles=inst.binding, role=tp.role,
            member_ok=lambda x: self._fits_window(inst, x.ts, x.ts),
            counter=self.metrics,
            subset_ok=lambda s: self._fits_window(inst, s[0].ts, s[-1].ts),
        )
        for members in subsets:
            self._spawn(inst, tp, members, new_event or members[-1])

    def _iter_spec(self, tp: TakePlan):
        if tp.iterate is not None:
            return tp.iterate
        it = self.nfa.branches[tp.branch].chain.iterated
        return (it.lo, it.hi, it.group_by)

    def _spawn(self, inst: Instance, tp: TakePlan, bound, spawn_event: Event):
        binding = dict(inst.binding)
        binding[tp.role] = bound
        members = bound if isinstance(bound, tuple) else (bound,)
        lo_ts = min(x.ts for x in members)
        hi_key = max(x.key for x in members)
        anchor = lo_ts if inst.anchor is None else min(inst.anchor, lo_ts)
        maxkey = hi_key if inst.maxkey is None else max(inst.maxkey, hi_key)
        shadow = None
        if self.paired:
            shadow = {t: list(v) for t, v in inst.shadow.items()}
        branch = tp.branch if inst.branch is None else inst.branch
        clone = self._new_instance(tp.dst, branch, binding, anchor, maxkey,
                                   inst.theta, shadow, spawn_event.key)
        self._entry(clone)

    # -- completion, negation, acceptance -------------------------------------

    def _complete_eager(self, inst: Instance, ap: AcceptPlan) -> bool:
        """Full positive set reached on an eager lattice state with a tail."""
        if not self._gates_pass(inst, ap):
            if not ap.grow:
                self._retire(inst)
                return True
            return False
        if ap.grow:
            shadow = None
            if self.paired:
                shadow = {t: list(v) for t, v in inst.shadow.items()}
            copy = self._new_instance(ap.tail[0][0], inst.branch,
                                      dict(inst.binding), inst.anchor,
                                      inst.maxkey, inst.theta, shadow,
                                      inst.spawn_key)
            self._tail_entry(copy, self.plans[copy.sid])
            return False
        self._move(inst, ap.tail[0][0])
        self._tail_entry(inst, self.plans[inst.sid])
        return True

    def _gates_pass(self, inst: Instance, ap: AcceptPlan) -> bool:
        if ap.gates is None:
            return True
        lo, hi, iter_atoms = ap.gates
        it = self.nfa.branches[inst.branch].chain.iterated
        members = inst.binding.get(it.role)
        if members is None or len(members) < lo:
            return False
        if iter_atoms and not eval_atoms(iter_atoms, inst.binding, self.metrics):
            return False
        return True

    def _tail_entry(self, inst: Instance, plan: StatePlan) -> None:
        branch = self.nfa.branches[inst.branch]
        tail = branch.tail
        idx = plan.neg.index
        inst.tail_idx = idx
        # Scan the buffered candidates of every remaining negated type now:
        # this is the only moment all of them are both complete (for types
        # that must precede a positive) and not yet expired.
        for sid, chk, wait in tail[idx:]:
            if self._neg_scan(inst, chk):
                return
        for j in range(idx, len(tail)):
            sid, chk, wait = tail[j]
            if wait:
                inst.tail_idx = j
                if inst.sid != sid:
                    self._move(inst, sid)
                return
        self._emit(inst, inst.maxkey[0])
        self._retire(inst)

    def _accept(self, inst: Instance, plan: StatePlan) -> None:
        ap = plan.accept
        for chk in ap.fc_at_f.get(inst.branch or 0, ()):
            if self._neg_scan(inst, chk):
                return
        if inst.theta > NEG_INF and inst.maxkey[0] <= inst.theta + self.window:
            self._retire(inst)
            return
        if ap.gates is not None and not self._gates_pass(inst, ap):
            if not ap.grow:
                self._retire(inst)
            return
        self._emit(inst, inst.maxkey[0])
        if not ap.grow:
            self._retire(inst)

    def _neg_scan(self, inst: Instance, chk: NegSpec) -> bool:
        """Buffered-candidate absence check; retires the instance on a hit."""
        lower = self._lower_bound(inst, chk.prec_roles)
        upper = self._upper_bound(inst, chk.succ_roles)
        self.metrics.buffer_search += 1
        for x in self.buffer.query(chk.etype, lower, upper):
            if self._candidate_ok(inst, chk, x, bounded=False):
                self._retire(inst)
                return True
        return False

    def _fc_scan(self, inst: Instance, chk: NegSpec) -> bool:
        if not chk.prec_roles:
            # No event is required to precede the negated one, so whether a
            # candidate invalidates a match depends on the final extent of
            # the match window; carry the latest candidate and decide at
            # acceptance.
            upper = self._upper_bound(inst, chk.succ_roles)
            self.metrics.buffer_search += 1
            for x in self.buffer.query(chk.etype, None, upper):
                if x.ts <= inst.theta:
                    continue
                if not chk.cond or self._cond_ok(inst, chk, x):
                    inst.theta = max(inst.theta, x.ts)
            return False
        return self._neg_scan(inst, chk)

    def _candidate_ok(self, inst: Instance, chk: NegSpec, x: Event,
                      bounded: bool = True) -> bool:
        if bounded:
            lower = self._lower_bound(inst, chk.prec_roles)
            if lower is not None and not x.key > lower:
                return False
            upper = self._upper_bound(inst, chk.succ_roles)
            if upper is not None and not x.key < upper:
                return False
        if not self._fits_window(inst, x.ts, x.ts):
            return False
        if chk.cond and not self._cond_ok(inst, chk, x):
            return False
        return True

    def _cond_ok(self, inst: Instance, chk: NegSpec, x: Event) -> bool:
        binding = dict(inst.binding)
        binding[chk.role] = x
        return eval_atoms(chk.cond, binding, self.metrics)

    # -- helpers ---------------------------------------------------------------

    def _lower_bound(self, inst: Instance, roles) -> Optional[tuple]:
        lower = None
        for r in roles:
            bound = inst.binding.get(r)
            if bound is None:
                continue
            key = max(x.key for x in bound) if isinstance(bound, tuple) else bound.key
            if lower is None or key > lower:
                lower = key
        return lower

    def _upper_bound(self, inst: Instance, roles) -> Optional[tuple]:
        upper = None
        for r in roles:
            bound = inst.binding.get(r)
            if bound is None:
                continue
            key = min(x.key for x in bound) if isinstance(bound, tuple) else bound.key
            if upper is None or key < upper:
                upper = key
        return upper

    def _fits_window(self, inst: Instance, lo_ts: int, hi_ts: int) -> bool:
        lo = lo_ts if inst.anchor is None else min(inst.anchor, lo_ts)
        hi = hi_ts if inst.maxkey is None else max(inst.maxkey[0], hi_ts)
        return hi - lo <= self.window

    def _shadow_check(self, inst, tp, lower, upper, cands) -> None:
        mine = inst.shadow.get(tp.etype, ())
        expected = [x.key for x in mine
                    if (lower is None or x.key > lower)
                    and (upper is None or x.key < upper)
                    and (self.watermark is None or x.ts >= self.watermark)]
        got = [x.key for x in cands]
        if expected != got:
            raise ShadowMismatch(
                f"shared buffer returned {got} but the per-instance buffer "
                f"holds {expected} (type {tp.etype}, state {inst.sid})"
            )


class MultiRuntime:
    """Runs one automaton per chain and merges their outputs (eager mode)."""

    def __init__(self, nfas, paired_buffers: bool = False):
        self.runtimes = [Runtime(n, paired_buffers=paired_buffers, branch_offset=i)
                         for i, n in enumerate(nfas)]
        self._peak = 0

    def step(self, e: Event) -> list:
        out = []
        for rt in self.runtimes:
            out.extend(rt.step(e))
        self._peak = max(self._peak, sum(len(rt.live) for rt in self.runtimes))
        out.sort(key=lambda m: (m.detection_ts, m.key()))
        return out

    def flush(self) -> list:
        out = []
        for rt in self.runtimes:
            out.extend(rt.flush())
        out.sort(key=lambda m: (m.detection_ts, m.key()))
        return out

    @property
    def metrics(self) -> Metrics:
        total = Metrics()
        for rt in self.runtimes:
            total.merge(rt.metrics)
        total.peak_live_instances = max(
            self._peak, max((rt.metrics.peak_live_instances
                             for rt in self.runtimes), default=0))
        return total


def run_stream(runtime, events: Iterable[Event]) -> list:
    """Convenience driver: step every event, flush, return all matches."""
    out = []
    for e in events:
        out.extend(runtime.step(e))
    out.extend(runtime.flush())
    return out

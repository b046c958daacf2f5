"""
Whole-run invariants checked on every protocol: a 3x3 grid under
converge-cast traffic with drifting clocks.
"""
from bisect import bisect_left
from collections import defaultdict

import pytest

from macsim.experiment import Simulation
from macsim.frames import FrameKind
from macsim.kernel import TICKS_PER_SECOND
from macsim.mac import PROTOCOLS
from macsim.radio import RadioState
from macsim.workload import PayloadStatus
from tests.helpers import make_config

pytestmark = pytest.mark.property


def grid_config(protocol):
    return make_config(protocol, kind='grid', pattern='convergecast', interarrival_s=5.0,
                       duration_s=60.0, drain_s=5.0, theta_ppm=30)


# Fixtures
@pytest.fixture(scope='module', params=sorted(PROTOCOLS))
def finished(request):
    """Fixture providing a finished recorded run and its metrics row, per protocol."""
    sim = Simulation(grid_config(request.param), seed=11, record=True)
    row = sim.run()
    return sim, row


class TestConservation:
    """Tests for time and payload bookkeeping."""

    def test_state_times_sum_to_run_length(self, finished):
        """Test that every node's state durations add up to the elapsed time."""
        sim, _ = finished
        for node in sim.topology.nodes:
            total = sum(sim.ledger.time_in_state(node, state, sim.kernel.now) for state in RadioState)
            assert total == sim.kernel.now, f"node {node}: {total} != {sim.kernel.now}"

    def test_ledger_trace_is_monotone(self, finished):
        """Test that transitions of one node never go back in time."""
        sim, _ = finished
        last = defaultdict(int)
        for node, _, at in sim.ledger.trace:
            assert at >= last[node]
            last[node] = at

    def test_payload_counts_partition(self, finished):
        """Test that each payload is in exactly one terminal or in-flight bucket."""
        sim, row = finished
        counts = sim.app.counts()
        assert counts['in_flight'] + counts['delivered'] + counts['dropped'] == counts['originated']
        assert row.delivered <= row.originated
        assert row.originated > 0

    def test_latencies_positive(self, finished):
        """Test that deliveries never precede creation."""
        sim, _ = finished
        for p in sim.app.payloads.values():
            if p.status is PayloadStatus.DELIVERED:
                assert p.latency >= 0
                assert p.hops >= 1


class TestChannel:
    """Tests for what the medium allowed to happen."""

    def test_deliveries_only_between_neighbours(self, finished):
        """Test that an intact frame only ever reached an in-range node."""
        sim, _ = finished
        neighbours = sim.topology.neighbor_map()
        assert sim.channel.deliveries
        for receiver, tx in sim.channel.deliveries:
            assert receiver in neighbours[tx.tx_node]

    def test_one_transmission_at_a_time(self, finished):
        """Test that no node overlaps its own transmissions."""
        sim, _ = finished
        by_node = defaultdict(list)
        for tx in sim.channel.transmissions:
            by_node[tx.tx_node].append(tx)
        for node, sent in by_node.items():
            sent.sort(key=lambda tx: (tx.start, tx.id))
            for earlier, later in zip(sent, sent[1:]):
                assert earlier.end <= later.start, f"node {node} overlaps at {later.start}"

    def test_no_reception_while_asleep(self, finished):
        """Test that every intact frame found its receiver in RX from first to last tick."""
        sim, _ = finished
        timeline = defaultdict(list)
        for node, state, at in sim.ledger.trace:
            timeline[node].append((at, state))
        times = {node: [at for at, _ in events] for node, events in timeline.items()}
        for receiver, tx in sim.channel.deliveries:
            events = timeline[receiver]
            lo = bisect_left(times[receiver], tx.start)
            hi = bisect_left(times[receiver], tx.end)
            window = events[lo:hi]
            rx_at_start = [i for i, (at, state) in enumerate(window)
                           if at == tx.start and state is RadioState.RX]
            assert rx_at_start, f"node {receiver} was not receiving when {tx.frame.kind.name} started at {tx.start}"
            after = [state for _, state in window[rx_at_start[-1] + 1:]]
            assert RadioState.SLEEP not in after, f"node {receiver} slept during {tx.frame.kind.name} at {tx.start}"


class TestEnergy:
    """Tests for energy as the integral of power over the recorded states."""

    def test_energy_replays_from_trace(self, finished):
        """Test that each node's energy equals the sum of its dwell times times state power."""
        sim, _ = finished
        end = sim.kernel.now
        power = sim.ledger.profile.power
        replayed = defaultdict(float)
        current = {}
        for node, state, at in sim.ledger.trace:
            if node in current:
                since, previous = current[node]
                replayed[node] += power(previous) * (at - since)
            current[node] = (at, state)
        for node, (since, state) in current.items():
            replayed[node] += power(state) * (end - since)
        for node in sim.topology.nodes:
            expected = sim.ledger.total_energy(node, end)
            assert replayed[node] / TICKS_PER_SECOND == pytest.approx(expected, rel=1e-9)


class TestProtocolRules:
    """Tests for per-protocol rules that must hold over a whole run."""

    def test_nav_respected(self, finished):
        """
        Test that NAV-based protocols never transmit under NAV.

        Every frame kind is checked. FRTS is the one exemption: it answers the
        very CTS that armed the NAV. Replies inside a node's own exchange (CTS,
        DATA, ACK) need no exemption since the NAV is only armed while no
        exchange is open.
        """
        sim, _ = finished
        if sim.config.protocol.name not in ('smac', 'tmac'):
            pytest.skip("no NAV in this protocol")
        exempt = {FrameKind.FRTS}
        checked = set()
        for mac in sim.macs.values():
            for at, kind, nav_until in mac.tx_log:
                if kind in exempt:
                    continue
                checked.add(kind)
                assert at >= nav_until, f"node {mac.node} sent {kind.name} at {at} under NAV {nav_until}"
        assert {FrameKind.SYNC, FrameKind.RTS, FrameKind.CTS, FrameKind.DATA, FrameKind.ACK} <= checked

    def test_long_preambles_cover_tw(self, finished):
        """Test that B-MAC preambles always outlast the sampling period."""
        sim, _ = finished
        if sim.config.protocol.name != 'bmac':
            pytest.skip("only B-MAC sends fixed long preambles")
        tw = sim.macs[0].params.tw_us
        preambles = [tx for tx in sim.channel.transmissions
                     if tx.frame.kind is FrameKind.PREAMBLE and not tx.aborted]
        assert preambles
        assert all(tx.frame.airtime >= tw for tx in preambles)


class TestDeterminism:
    """Tests for reproducibility."""

    @pytest.mark.parametrize('protocol', sorted(PROTOCOLS))
    def test_same_seed_same_row(self, protocol):
        """Test that two runs with one seed produce identical metrics."""
        first = Simulation(grid_config(protocol), seed=4).run()
        second = Simulation(grid_config(protocol), seed=4).run()
        assert first == second

"""
Tests for T-MAC: adaptive active period, FRTS and full-buffer priority.
"""
import pytest

from macsim.errors import ConfigError
from macsim.frames import Frame, FrameKind, FrameSizes
from macsim.kernel import seconds
from macsim.mac.tmac import Tmac, TmacParams, suggested_ta
from macsim.radio import RadioState
from macsim.workload import PayloadStatus
from tests.helpers import make_sim, payload, send_at

pytestmark = pytest.mark.sync

AWAKE_STATES = (RadioState.LISTEN, RadioState.RX, RadioState.TX)


def awake_fraction(sim, node, start_s, end_s):
    sim.kernel.run_until(seconds(start_s))
    before = sum(sim.ledger.time_in_state(node, s, sim.kernel.now) for s in AWAKE_STATES)
    sim.kernel.run_until(seconds(end_s))
    after = sum(sim.ledger.time_in_state(node, s, sim.kernel.now) for s in AWAKE_STATES)
    return (after - before) / seconds(end_s - start_s)


class TestParameters:
    """Tests for TA sizing and validation."""

    def test_suggested_ta(self):
        """Test the 1.5 x (contention + RTS + turnaround) rule."""
        assert suggested_ta(TmacParams(), FrameSizes(), 0) == int(1.5 * (16 * 320 + 384))

    def test_short_ta_warns(self):
        """Test that a TA shorter than contention + RTS + CTS is flagged."""
        assert Tmac.check_params(TmacParams(ta_us=1_000), FrameSizes(), 0)
        assert Tmac.check_params(TmacParams(), FrameSizes(), 0) == []

    def test_ta_must_be_positive(self):
        """Test that a zero TA is refused."""
        with pytest.raises(ConfigError):
            TmacParams(ta_us=0)

    def test_frts_gap(self):
        """Test that FRTS leaves room for one control frame before DATA."""
        sim = make_sim('tmac')
        assert sim.macs[0].data_gap() == 384 + 100
        sim = make_sim('tmac', params={'frts': False})
        assert sim.macs[0].data_gap() == 0


class TestAdaptiveActivePeriod:
    """Tests for the activity timeout."""

    def test_idle_node_sleeps_early(self):
        """Test that an idle T-MAC node listens far less than S-MAC."""
        tmac = awake_fraction(make_sim('tmac', seed=3, duration_s=30.0), 0, 10, 20)
        smac = awake_fraction(make_sim('smac', seed=3, duration_s=30.0), 0, 10, 20)
        assert tmac < smac
        assert tmac < 0.08, f"awake fraction {tmac:.3f}"

    def test_ta_sleep_counted(self):
        """Test that the deadline actually ends active periods."""
        sim = make_sim('tmac', seed=3)
        sim.kernel.run_until(seconds(15))
        assert sim.macs[0].stats['ta_sleep'] > 0

    def test_longer_ta_listens_longer(self):
        """Test that raising TA raises idle listening."""
        short = awake_fraction(make_sim('tmac', seed=4, params={'ta_us': 10_000}), 0, 10, 20)
        long = awake_fraction(make_sim('tmac', seed=4, params={'ta_us': 40_000}), 0, 10, 20)
        assert short < long


class TestDelivery:
    """Tests for multi-hop forwarding under T-MAC."""

    def test_single_hop(self):
        """Test one-hop delivery."""
        sim = make_sim('tmac', seed=5)
        send_at(sim, seconds(12), 1, 0)
        sim.kernel.run_until(seconds(15))
        assert payload(sim).status is PayloadStatus.DELIVERED

    def test_three_hops(self):
        """Test that a payload crosses three hops."""
        sim = make_sim('tmac', seed=6, count=4)
        send_at(sim, seconds(12), 3, 0)
        sim.kernel.run_until(seconds(20))
        p = payload(sim)
        assert p.status is PayloadStatus.DELIVERED
        assert p.hops == 3

    def test_no_initiation_under_nav(self):
        """Test that no RTS starts while the sender's NAV is active."""
        sim = make_sim('tmac', seed=9, count=4)
        for k in range(8):
            send_at(sim, seconds(12 + k / 2), 3, 0)
            send_at(sim, seconds(12.1 + k / 2), 1, 0)
        sim.kernel.run_until(seconds(30))
        for mac in sim.macs.values():
            for at, kind, nav_until in mac.tx_log:
                if kind.name in ('RTS', 'SYNC'):
                    assert at >= nav_until


def air_sequence(sim, since):
    return [(tx.frame.kind, tx.frame.src, tx.frame.dst) for tx in sim.channel.transmissions
            if tx.start >= since and tx.frame.kind is not FrameKind.SYNC]


def step_until(sim, condition, step=50):
    while not condition():
        sim.kernel.run_until(sim.kernel.now + step)


class TestFutureRequestToSend:
    """Tests for FRTS on a 2x2 grid: nodes 1 and 2 both report to 0 but cannot hear each other."""

    def test_frts_keeps_next_hop_awake(self):
        """Test that a node overhearing its next hop's CTS sends FRTS and then gets its turn."""
        sim = make_sim('tmac', seed=5, kind='grid', rows=2, cols=2, duration_s=30.0)
        assert 2 not in sim.channel.neighbors(1)
        sim.kernel.run_until(seconds(20))
        first, second, sink = sim.macs[1], sim.macs[2], sim.macs[0]
        step_until(sim, lambda: bool(first.data_open))
        assert sink.awake and second.data_open

        since = sim.kernel.now
        sim.app.originate(1, 0)
        step_until(sim, lambda: first.exchange is not None and first.exchange.stage != 'rts')
        sim.app.originate(2, 0)
        sim.kernel.run_until(since + seconds(0.2))

        assert air_sequence(sim, since)[:9] == [
            (FrameKind.RTS, 1, 0), (FrameKind.CTS, 0, 1), (FrameKind.FRTS, 2, 0),
            (FrameKind.DATA, 1, 0), (FrameKind.ACK, 0, 1),
            (FrameKind.RTS, 2, 0), (FrameKind.CTS, 0, 2),
            (FrameKind.DATA, 2, 0), (FrameKind.ACK, 0, 2),
        ]
        cts, frts = [tx.frame for tx in sim.channel.transmissions
                     if tx.start >= since and tx.frame.kind in (FrameKind.CTS, FrameKind.FRTS)][:2]
        assert frts.duration_field == cts.duration_field - sim.channel.turnaround - sim.sizes.control
        assert sink.stats['frts_received'] == 1
        assert payload(sim, 0).status is PayloadStatus.DELIVERED
        assert payload(sim, 1).status is PayloadStatus.DELIVERED

    def test_frts_disabled(self):
        """Test that without FRTS an overheard CTS only sets the NAV."""
        sim = make_sim('tmac', kind='grid', rows=2, cols=2, params={'frts': False})
        sim.kernel.run_until(seconds(1))
        mac = sim.macs[2]
        sim.app.originate(2, 0)
        mac.handle_frame(Frame(FrameKind.CTS, 0, 1, 384, duration_field=5_000))
        assert not mac.timer_pending('reply')
        assert mac.nav_active


class TestFullBufferPriority:
    """Tests for a relay with a full queue answering an RTS with its own."""

    def test_full_relay_sends_first_then_grants(self):
        """Test RTS(1->0) CTS DATA ACK before the deferred CTS to the original requester."""
        sim = make_sim('tmac', seed=5, count=3, pattern='convergecast', interarrival_s=1e6, duration_s=30.0)
        sim.kernel.run_until(seconds(20))
        relay = sim.macs[1]
        step_until(sim, lambda: bool(relay.data_open))
        assert sim.macs[0].awake

        since = sim.kernel.now
        for _ in range(relay.params.queue_capacity):
            sim.app.originate(1, 0)
        assert relay.queue.full
        duration = relay.rts_duration()
        relay.handle_frame(Frame(FrameKind.RTS, 2, 1, 384, duration_field=duration))
        assert relay.stats['priority_rts'] == 1
        assert relay.exchange.peer == 0
        assert relay._deferred_cts == (2, duration)

        sim.kernel.run_until(since + seconds(0.05))
        assert air_sequence(sim, since)[:5] == [
            (FrameKind.RTS, 1, 0), (FrameKind.CTS, 0, 1), (FrameKind.DATA, 1, 0),
            (FrameKind.ACK, 0, 1), (FrameKind.CTS, 1, 2),
        ]
        assert relay._deferred_cts is None

    def test_not_full_answers_normally(self):
        """Test that a relay with room in its queue grants the RTS straight away."""
        sim = make_sim('tmac', count=3, pattern='convergecast', interarrival_s=1e6)
        sim.kernel.run_until(seconds(1))
        relay = sim.macs[1]
        sim.app.originate(1, 0)
        relay.handle_frame(Frame(FrameKind.RTS, 2, 1, 384, duration_field=relay.rts_duration()))
        assert relay.stats['priority_rts'] == 0
        assert relay.exchange.role == 'receiver' and relay.exchange.peer == 2

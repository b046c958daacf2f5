"""
Tests for WiseMAC: drift-bounded short preambles and the more bit.
"""
import pytest

from macsim.frames import Frame, FrameKind
from macsim.kernel import seconds
from macsim.mac.lpl import LplMode
from macsim.mac.wisemac import NeighborScheduleTable, wakeup_preamble
from macsim.workload import PayloadStatus
from tests.helpers import make_sim, payload, send_at

pytestmark = pytest.mark.preamble

LONG_PREAMBLE = 250_000 + 2_500


class TestWakeupPreamble:
    """Tests for the drift-covering preamble length."""

    def test_four_theta_l(self):
        """Test 4 x theta x L in ticks."""
        assert wakeup_preamble(30, 1_000_000, 250_000) == 120

    def test_rounds_up(self):
        """Test that a fraction of a tick becomes a whole tick."""
        assert wakeup_preamble(30, 1, 250_000) == 1

    def test_capped_at_tw(self):
        """Test that the preamble never exceeds the sampling period."""
        assert wakeup_preamble(30, 10**10, 250_000) == 250_000

    def test_negative_interval(self):
        """Test that a negative interval is refused."""
        with pytest.raises(ValueError):
            wakeup_preamble(30, -1, 250_000)


class TestScheduleTable:
    """Tests for neighbour sample prediction."""

    def test_predict(self):
        """Test that predictions step forward in whole periods."""
        table = NeighborScheduleTable()
        table.update(4, 1_000, 0)
        assert table.predict(4, 1_000, 100) == 1_000
        assert table.predict(4, 1_001, 100) == 1_100
        assert table.predict(4, 1_250, 100) == 1_300

    def test_drop(self):
        """Test that dropping forgets the neighbour."""
        table = NeighborScheduleTable()
        table.update(4, 1_000, 0)
        table.drop(4)
        table.drop(4)
        assert 4 not in table
        assert len(table) == 0


class TestShortPreamble:
    """Tests for learning a schedule from an ACK and using it."""

    @pytest.mark.parametrize('theta_ppm', [0, 30])
    def test_second_send_is_short(self, theta_ppm):
        """Test that the first send is full length and the next one is short."""
        sim = make_sim('wisemac', theta_ppm=theta_ppm)
        send_at(sim, seconds(1), 1, 0)
        send_at(sim, seconds(5), 1, 0)
        sim.kernel.run_until(seconds(6))
        mac = sim.macs[1]
        assert payload(sim, 0).status is PayloadStatus.DELIVERED
        assert payload(sim, 1).status is PayloadStatus.DELIVERED
        assert mac.preamble_lengths[0] == LONG_PREAMBLE
        assert mac.preamble_lengths[1] < LONG_PREAMBLE
        assert mac.stats['short_preambles'] == 1
        assert 0 in mac.table

    @pytest.mark.parametrize('theta_ppm', [0, 30])
    def test_short_preamble_is_drift_window_plus_sample(self, theta_ppm):
        """Test that the backoff is spent listening before the preamble, not inside it."""
        sim = make_sim('wisemac', theta_ppm=theta_ppm)
        send_at(sim, seconds(1), 1, 0)
        send_at(sim, seconds(5), 1, 0)
        sim.kernel.run_until(seconds(6))
        mac = sim.macs[1]
        sample = mac.params.sample_us
        short = mac.preamble_lengths[1]
        if theta_ppm == 0:
            assert short == sample
        else:
            assert sample < short <= sample + wakeup_preamble(theta_ppm, seconds(5), mac.params.tw_us)
        assert mac.plan is None and mac.plan_backoff is None

    def test_more_bit_skips_second_preamble(self):
        """Test that a queued second packet follows the first ACK directly."""
        sim = make_sim('wisemac')
        send_at(sim, seconds(1), 1, 0)
        send_at(sim, seconds(1) + 1, 1, 0)
        sim.kernel.run_until(seconds(2))
        assert payload(sim, 0).status is PayloadStatus.DELIVERED
        assert payload(sim, 1).status is PayloadStatus.DELIVERED
        assert len(sim.macs[1].preamble_lengths) == 1
        data = [tx for tx in sim.channel.transmissions
                if tx.tx_node == 1 and tx.frame.kind is FrameKind.DATA]
        assert len(data) == 2
        assert data[0].frame.more_bit and not data[1].frame.more_bit


class TestOverheardSchedule:
    """Tests for learning a neighbour's schedule from someone else's ACK."""

    def test_third_node_learns_from_overheard_ack(self):
        """Test that a bystander learns the receiver's schedule and then sends to it short."""
        sim = make_sim('wisemac', count=3, range_m=20.0)
        send_at(sim, seconds(1), 1, 0)
        sim.kernel.run_until(seconds(2))
        bystander = sim.macs[2]
        assert payload(sim, 0).status is PayloadStatus.DELIVERED
        assert 0 in bystander.table
        assert bystander.stats['tx_data'] == 0

        send_at(sim, seconds(4), 2, 0)
        sim.kernel.run_until(seconds(5))
        assert payload(sim, 1).status is PayloadStatus.DELIVERED
        assert bystander.preamble_lengths[0] < LONG_PREAMBLE
        assert bystander.stats['short_preambles'] == 1

    def test_overheard_ack_ends_receive(self):
        """Test that an ACK for someone else is learned from and sends the node back to sampling."""
        sim = make_sim('wisemac', count=3)
        sim.kernel.run_until(seconds(1))
        mac = sim.macs[2]
        mac.detect()
        mac.on_rx_frame(Frame(FrameKind.ACK, 1, 0, 384, sampling_offset=40_000))
        entry = mac.table.get(1)
        assert entry is not None
        assert entry.next_sample == mac.local_now() + 40_000
        assert mac.mode is LplMode.IDLE

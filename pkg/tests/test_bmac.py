"""
Tests for low-power listening, B-MAC and B-MAC+.
"""
import pytest

from macsim.frames import BROADCAST, FrameKind
from macsim.kernel import seconds
from macsim.mac.bmac import Bmac
from macsim.mac.lpl import LplMode, LplParams
from macsim.radio import RadioState
from macsim.workload import PayloadStatus
from tests.helpers import make_sim, payload, send_at

pytestmark = pytest.mark.preamble

# 2x2 grid rooted at 0: node 3 sends through node 1, node 2 overhears.
SQUARE = {'kind': 'grid', 'rows': 2, 'cols': 2}


def airtimes(sim, node, kind):
    return [tx.frame.airtime for tx in sim.channel.transmissions
            if tx.tx_node == node and tx.frame.kind is kind]


class TestSampling:
    """Tests for the periodic channel sample."""

    def test_one_sample_per_period(self):
        """Test that an idle node samples once per tw."""
        sim = make_sim('bmac')
        sim.kernel.run_until(seconds(10))
        assert sim.macs[0].samples in (40, 41)

    def test_idle_duty_cycle(self):
        """Test that an idle node is awake for about sample / tw."""
        sim = make_sim('bmac')
        sim.kernel.run_until(seconds(10))
        awake = sum(sim.ledger.time_in_state(0, s, sim.kernel.now)
                    for s in (RadioState.LISTEN, RadioState.RX))
        assert awake == pytest.approx(seconds(10) * 2_500 / 250_000, rel=0.05)

    def test_next_sample_after(self):
        """Test the local sample prediction used in ACKs."""
        sim = make_sim('bmac')
        mac = sim.macs[0]
        mac.next_sample = 1_000
        assert mac.next_sample_after(500) == 1_000
        assert mac.next_sample_after(1_000) == 251_000
        assert mac.next_sample_after(600_000) == 751_000

    def test_dense_sampling_warns(self):
        """Test that sampling more than a tenth of the time is flagged."""
        assert Bmac.check_params(LplParams(tw_us=20_000, sample_us=2_500), None, 0)


class TestBmac:
    """Tests for the long-preamble protocol."""

    def test_unicast_delivery(self):
        """Test preamble, DATA and ACK across one hop."""
        sim = make_sim('bmac')
        send_at(sim, seconds(1), 1, 0)
        sim.kernel.run_until(seconds(2))
        p = payload(sim)
        assert p.status is PayloadStatus.DELIVERED
        assert p.latency < 270_000
        assert sim.macs[0].stats['tx_ack'] == 1
        assert sim.macs[1].stats['delivered'] == 1

    def test_preamble_covers_sampling_period(self):
        """Test that every preamble outlasts tw."""
        sim = make_sim('bmac', count=3)
        for k in range(5):
            send_at(sim, seconds(1 + k), 2, 0)
        sim.kernel.run_until(seconds(8))
        lengths = airtimes(sim, 2, FrameKind.PREAMBLE) + airtimes(sim, 1, FrameKind.PREAMBLE)
        assert lengths
        assert all(length >= 250_000 for length in lengths)

    def test_overhearer_sleeps_after_header(self):
        """Test that a non-destination stops listening after the DATA header."""
        sim = make_sim('bmac', **SQUARE)
        send_at(sim, seconds(1), 3, 0)
        sim.kernel.run_until(seconds(3))
        assert payload(sim).status is PayloadStatus.DELIVERED
        assert sim.macs[2].stats['header_sleeps'] >= 1

    def test_broadcast(self):
        """Test that a broadcast is delivered without an ACK."""
        sim = make_sim('bmac')
        send_at(sim, seconds(1), 1, BROADCAST)
        sim.kernel.run_until(seconds(2))
        p = payload(sim)
        assert p.status is PayloadStatus.DELIVERED
        assert sim.app.broadcast_receipts[p.id] == {0}
        assert sim.macs[0].stats['tx_ack'] == 0

    def test_back_to_idle(self):
        """Test that both ends return to sampling after the exchange."""
        sim = make_sim('bmac')
        send_at(sim, seconds(1), 1, 0)
        sim.kernel.run_until(seconds(2))
        for node in (0, 1):
            assert sim.macs[node].mode in (LplMode.IDLE, LplMode.SAMPLING)
            assert not sim.macs[node].queue

    @pytest.mark.parametrize('seed', range(1, 11))
    def test_sender_tx_time_exact(self, seed):
        """Test that one packet costs the sender exactly tw + sample + DATA airtime on air."""
        sim = make_sim('bmac', seed=seed)
        send_at(sim, seconds(1), 1, 0)
        sim.kernel.run_until(seconds(2))
        assert payload(sim).status is PayloadStatus.DELIVERED
        assert sim.ledger.time_in_state(1, RadioState.TX, sim.kernel.now) == 250_000 + 2_500 + 2_048


class TestBmacPlus:
    """Tests for addressed preamble blocks."""

    def test_block_count(self):
        """Test that the blocks cover tw + sample."""
        sim = make_sim('bmac+')
        assert sim.macs[0].block_count == 51

    def test_delivery_and_exact_wakeup(self):
        """Test that the destination sleeps through the countdown and wakes on time."""
        sim = make_sim('bmac+')
        send_at(sim, seconds(1), 1, 0)
        sim.kernel.run_until(seconds(2))
        assert payload(sim).status is PayloadStatus.DELIVERED
        assert sim.macs[0].prediction_errors == [0]

    def test_destination_listens_less_than_bmac(self):
        """Test that sleeping through the countdown saves receive time."""
        results = {}
        for protocol in ('bmac', 'bmac+'):
            sim = make_sim(protocol)
            for k in range(4):
                send_at(sim, seconds(1 + k), 1, 0)
            sim.kernel.run_until(seconds(5))
            results[protocol] = sim.ledger.time_in_state(0, RadioState.LISTEN, sim.kernel.now)
        assert results['bmac+'] < results['bmac']

    def test_overhearer_sleeps_after_one_block(self):
        """Test that a foreign block sends the overhearer back to sleep."""
        sim = make_sim('bmac+', **SQUARE)
        send_at(sim, seconds(1), 3, 0)
        sim.kernel.run_until(seconds(3))
        assert payload(sim).status is PayloadStatus.DELIVERED
        assert sim.macs[2].stats['block_sleeps'] >= 1


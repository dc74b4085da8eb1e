"""Tests for path loss, ground reflection and blockage."""

import numpy as np

import terra.array as array
import terra.channel as channel
from terra.channel import Blocker, LinkBudget, Pose
from terra.errors import ConfigError, DomainError, error_collector
from tests.test_all import TestUtils


def calibrated(tilt, **fields):
    """Return a config putting the reference LoS link at -60 dBm."""
    cfg = channel.make_channel_config(**fields)
    loss = channel.calibrate_system_loss(cfg, channel.reference_link(tilt),
                                         -60.0)
    return cfg._replace(system_loss=loss)


class PathLossTests(TestUtils):
    """Tests for free-space loss and blocker geometry."""

    def test_fspl(self):
        self.assertAlmostEqual(channel.fspl(1.0, 60e9), 68.01, places=2)
        self.assertAlmostEqual(channel.fspl(2.0, 60e9) -
                               channel.fspl(1.0, 60e9), 6.0206, places=4)

    def test_fspl_domain(self):
        with self.assertRaises(DomainError):
            channel.fspl(0.0, 60e9)
        with self.assertRaises(DomainError):
            channel.fspl(1.0, -1.0)

    def test_d_br_max(self):
        self.assertAlmostEqual(channel.d_br_max(6.0, 2.5, 1.0, 1.78), 3.12)
        self.assertEqual(error_collector.warnings(), [])

    def test_d_br_max_clamps_tall_blocker(self):
        self.assertAlmostEqual(channel.d_br_max(6.0, 2.5, 1.0, 3.0), 6.0)
        self.assertEqual(len(error_collector.warnings()), 1)

    def test_d_br_max_domain(self):
        with self.assertRaises(DomainError):
            channel.d_br_max(6.0, 1.0, 2.5, 1.78)


class ConfigTests(TestUtils):
    """Tests for channel configuration."""

    def test_decode_threshold_default(self):
        cfg = channel.make_channel_config(noise_floor=-80.0)
        self.assertEqual(cfg.decode_threshold, -70.0)

    def test_decode_threshold_above_floor(self):
        with self.assertRaises(ConfigError):
            channel.make_channel_config(decode_threshold=-80.0)

    def test_table_is_sorted(self):
        cfg = channel.make_channel_config(
            gr_loss_table=((20, 4.0), (0, 6.0)))
        self.assertEqual(cfg.gr_loss_table, ((0.0, 6.0), (20.0, 4.0)))

    def test_gr_gap_interpolates(self):
        self.assertAlmostEqual(channel.gr_gap(channel.CONCRETE, 5.0), 5.3)
        self.assertAlmostEqual(channel.gr_gap(channel.CONCRETE, 30.0), 4.05)
        self.assertAlmostEqual(channel.gr_gap(channel.CONCRETE, -5.0), 6.0)


class GroundReflectionTests(TestUtils):
    """Tests for the ground-reflected path."""

    def gr_rss(self, tilt, table=channel.CONCRETE):
        cfg = calibrated(tilt, gr_loss_table=table)
        link = channel.reference_link(tilt)
        dive = channel.ground_reflection_path(link.tx, link.rx, cfg).arrive[1]
        aimed = channel.reference_link(tilt, rx_zen=dive)
        budget = LinkBudget(cfg, aimed.tx, aimed.rx)
        return budget.path_rss(aimed.tx_beam,
                               aimed.rx_beam)[channel.GROUND_REFLECTION]

    def test_concrete(self):
        self.assertAlmostEqual(self.gr_rss(0.0), -66.0, places=6)
        self.assertAlmostEqual(self.gr_rss(10.0), -64.6, places=6)
        self.assertAlmostEqual(self.gr_rss(20.0), -64.05, places=6)

    def test_gravel(self):
        self.assertAlmostEqual(channel.gr_gap(channel.GRAVEL, 20.0), 4.35)
        self.assertAlmostEqual(self.gr_rss(0.0, channel.GRAVEL), -66.0,
                               places=6)
        self.assertAlmostEqual(self.gr_rss(10.0, channel.GRAVEL), -64.6,
                               places=6)
        self.assertAlmostEqual(self.gr_rss(20.0, channel.GRAVEL), -64.35,
                               places=6)
        self.assertIs(channel.SURFACES["gravel"], channel.GRAVEL)

    def test_indoor_tiles(self):
        self.assertAlmostEqual(self.gr_rss(0.0, channel.INDOOR_TILES),
                               -65.85, places=6)

    def test_calibration_hits_target(self):
        cfg = calibrated(10.0)
        link = channel.reference_link(10.0)
        budget = LinkBudget(cfg, link.tx, link.rx)
        self.assertAlmostEqual(budget.rss(link.tx_beam, link.rx_beam), -60.0)

    def test_geometry(self):
        link = channel.reference_link(10.0)
        path = channel.ground_reflection_path(link.tx, link.rx)
        self.assertAlmostEqual(path.length, (36 + 3.5 ** 2) ** 0.5)
        self.assertAlmostEqual(path.depart[0], path.arrive[0] - 180.0)
        self.assertGreater(path.arrive[1], 0)
        bounce = channel.bounce_point(link.tx, link.rx)
        self.assertAlmostEqual(bounce[0], 6.0 * 2.5 / 3.5)

    def test_needs_height(self):
        with self.assertRaises(DomainError):
            channel.ground_reflection_path(Pose((0, 0, 0)), Pose((5, 0, 1)))

    def test_disabled(self):
        cfg = channel.make_channel_config(ground_reflection=False)
        link = channel.reference_link()
        paths = channel.link_paths(cfg, link.tx, link.rx)
        self.assertEqual([p.kind for p in paths], [channel.LOS])


class BlockageTests(TestUtils):
    """Tests for pedestrian occlusion."""

    def setUp(self):
        super().setUp()
        self.link = channel.reference_link(10.0)

    def test_blocked_los_clamps_to_noise_floor(self):
        cfg = calibrated(10.0, ground_reflection=False)
        budget = LinkBudget(cfg, self.link.tx, self.link.rx,
                            [Blocker((3.5, 0.0))])
        self.assertTrue(budget.los_occluded())
        path = budget.path_rss(self.link.tx_beam, self.link.rx_beam)
        self.assertAlmostEqual(path[channel.LOS], -80.0)
        self.assertEqual(budget.rss(self.link.tx_beam, self.link.rx_beam),
                         -78.0)

    def test_leg_gap_keeps_reflection(self):
        cfg = calibrated(10.0)
        standing = Blocker((3.5, 0.0), clearance=0.8)
        budget = LinkBudget(cfg, self.link.tx, self.link.rx, [standing])
        self.assertEqual(budget.occlusion(), (True, False))

        solid = Blocker((3.5, 0.0))
        budget = LinkBudget(cfg, self.link.tx, self.link.rx, [solid])
        self.assertEqual(budget.occlusion(), (True, True))

    def test_far_blocker(self):
        cfg = calibrated(10.0)
        budget = LinkBudget(cfg, self.link.tx, self.link.rx,
                            [Blocker((3.5, 5.0))])
        self.assertEqual(budget.occlusion(), (False, False))

    def test_reach_along_the_link(self):
        reach = channel.d_br_max(6.0, 2.5, 1.0, 1.78)
        for d in np.linspace(0.1, 5.9, 59):
            if abs(d - reach) < 0.05:
                continue
            thin = Blocker((6.0 - d, 0.0), width=1e-3)
            self.assertEqual(channel.blocker_occludes(
                self.link.tx, self.link.rx, thin), d < reach, d)
            aside = Blocker((6.0 - d, 0.3))
            self.assertFalse(channel.blocker_occludes(
                self.link.tx, self.link.rx, aside))

    def test_blocker_behind_receiver(self):
        self.assertFalse(channel.blocker_occludes(
            self.link.tx, self.link.rx, Blocker((7.0, 0.0))))

    def test_occluded_by_replaces_blockers(self):
        cfg = calibrated(10.0)
        blocked = LinkBudget(cfg, self.link.tx, self.link.rx,
                             [Blocker((3.5, 0.0))])
        clear = blocked.occluded_by([])
        self.assertFalse(clear.los_occluded())
        self.assertAlmostEqual(
            clear.rss(self.link.tx_beam, self.link.rx_beam), -60.0)


class LinkBudgetTests(TestUtils):
    """Tests for rss over whole codebooks."""

    def setUp(self):
        super().setUp()
        self.cfg = calibrated(10.0)
        self.tx = Pose((0.0, 0.0, 2.5), 0.0, 10.0)
        self.rx = Pose((6.0, 0.0, 1.0), 180.0, 0.0)
        self.tx_book = array.make_codebook(
            array.ArrayGeometry(array.LINEAR, 12, 1), (-60, 60), n_az=25)
        self.rx_book = array.make_codebook(
            array.ArrayGeometry(array.PLANAR, 6, 6), (-50, 60), (-30, 45),
            5, 5)
        self.budget = LinkBudget(self.cfg, self.tx, self.rx)

    def test_rss_all_rx(self):
        values = self.budget.rss_all_rx((self.tx_book, 12), self.rx_book)
        for b in range(len(self.rx_book)):
            self.assertAlmostEqual(values[b], self.budget.rss(
                (self.tx_book, 12), (self.rx_book, b)))

    def test_best_tx(self):
        self.assertEqual(self.budget.best_tx_beam(self.tx_book), 12)
        best = self.budget.rss_best_tx(self.tx_book, (self.rx_book, 7))
        for tx in range(len(self.tx_book)):
            self.assertGreaterEqual(best + 1e-9, self.budget.rss(
                (self.tx_book, tx), (self.rx_book, 7)))

    def test_envelope_covers_members(self):
        wide = self.budget.rss_envelope((self.tx_book, 12), self.rx_book,
                                        range(25))
        values = self.budget.rss_all_rx((self.tx_book, 12), self.rx_book)
        self.assertAlmostEqual(wide, max(values))

    def test_rss_function(self):
        self.assertAlmostEqual(
            channel.rss(self.cfg, self.tx, self.rx, (self.tx_book, 12),
                        (self.rx_book, 7)),
            self.budget.rss((self.tx_book, 12), (self.rx_book, 7)))

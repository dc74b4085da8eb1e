"""Tests for trajectories and the blocker process."""

import numpy as np

import terra.mobility as mobility
from terra.errors import ConfigError
from terra.mobility import BlockerProcess, MobilityModel
from tests.test_all import TestUtils


class TrajectoryTests(TestUtils):
    """Tests for pose_at."""

    def test_static(self):
        model = MobilityModel(start=(6.0, 0.0, 1.0), boresight_az=180.0)
        self.assertEqual(mobility.pose_at(model, 0.0),
                         mobility.pose_at(model, 12.5))
        self.assertTrue(mobility.is_static(model))

    def test_linear_walk(self):
        model = MobilityModel(mobility.LINEAR_WALK, speed=1.0,
                              trajectory_length=2.0)
        pose = mobility.pose_at(model, 1.0)
        self.assertAlmostEqual(pose.position[0], 1.0)
        self.assertEqual(mobility.pose_at(model, 2.0).position,
                         (2.0, 0.0, 1.0))
        self.assertEqual(mobility.pose_at(model, 5.0).position,
                         (2.0, 0.0, 1.0))

    def test_linear_walk_heading(self):
        model = MobilityModel(mobility.LINEAR_WALK, heading=90.0,
                              start=(6.0, -1.0, 1.0))
        x, y, h = mobility.pose_at(model, 1.5).position
        self.assertAlmostEqual(x, 6.0)
        self.assertAlmostEqual(y, 0.5)

    def test_look_at(self):
        model = MobilityModel(mobility.LINEAR_WALK, heading=90.0,
                              start=(6.0, 0.0, 1.0), look_at=(0.0, 0.0))
        self.assertAlmostEqual(mobility.pose_at(model, 0.0).boresight_az,
                               180.0)

    def test_rotational(self):
        model = MobilityModel(mobility.ROTATIONAL, angular_velocity=120.0,
                              sector=(0.0, 180.0), boresight_az=0.0)
        self.assertAlmostEqual(mobility.pose_at(model, 1.0).boresight_az,
                               120.0)
        self.assertAlmostEqual(mobility.pose_at(model, 1.5).boresight_az,
                               180.0)
        self.assertAlmostEqual(mobility.pose_at(model, 2.0).boresight_az,
                               120.0)
        self.assertAlmostEqual(mobility.pose_at(model, 3.0).boresight_az,
                               0.0)

    def test_rotational_random_start_stays_in_sector(self):
        for seed in range(10):
            model = MobilityModel(mobility.ROTATIONAL, sector=(140.0, 220.0),
                                  randomize_start=True, seed=seed)
            for t in np.linspace(0.0, 3.0, 31):
                az = mobility.pose_at(model, t).boresight_az
                self.assertGreaterEqual(az, 140.0 - 1e-9)
                self.assertLessEqual(az, 220.0 + 1e-9)

    def test_negative_time(self):
        with self.assertRaises(ConfigError):
            mobility.pose_at(MobilityModel(), -0.1)

    def test_free_walk_in_bounds(self):
        model = MobilityModel(mobility.FREE_WALK, bounds=(0.0, 0.0, 4.0, 4.0),
                              start=(2.0, 2.0, 1.0), seed=3)
        for t in np.arange(0.0, 20.0, 0.5):
            x, y, _ = mobility.pose_at(model, t).position
            self.assertTrue(0.0 <= x <= 4.0)
            self.assertTrue(0.0 <= y <= 4.0)

    def test_free_walk_deterministic(self):
        model = MobilityModel(mobility.FREE_WALK, bounds=(4.0, -2.0, 8.0, 2.0),
                              start=(6.0, 0.0, 1.0), seed=11)
        other = MobilityModel(mobility.FREE_WALK,
                              bounds=(4.0, -2.0, 8.0, 2.0),
                              start=(6.0, 0.0, 1.0), seed=11)
        # Evaluate out of order; poses do not depend on earlier queries.
        for t in (7.0, 1.0, 3.5):
            self.assertEqual(mobility.pose_at(model, t),
                             mobility.pose_at(other, t))

    def test_jitter_starts_at_zero(self):
        model = MobilityModel(mobility.FREE_WALK, bounds=(0, 0, 1, 1), seed=2)
        self.assertAlmostEqual(mobility.boresight_jitter(model, 0.0), 0.0)

    def test_free_walk_needs_bounds(self):
        with self.assertRaises(ConfigError):
            mobility.check_mobility(MobilityModel(mobility.FREE_WALK))

    def test_free_walk_start_in_bounds(self):
        for speed in (0.0, 1.0):
            model = MobilityModel(mobility.FREE_WALK, speed=speed,
                                  bounds=(4.0, -2.0, 8.0, 2.0),
                                  start=(2.0, 0.0, 1.0))
            with self.assertRaises(ConfigError):
                mobility.check_mobility(model)
        mobility.check_mobility(model._replace(start=(4.0, 2.0, 1.0)))

    def test_unknown_kind(self):
        with self.assertRaises(ConfigError):
            mobility.check_mobility(MobilityModel("teleport"))

    def test_trajectory_rows(self):
        model = MobilityModel(mobility.LINEAR_WALK)
        rows = mobility.trajectory_rows(model, [0.0, 1.0])
        self.assertEqual(len(rows), 2)
        self.assertAlmostEqual(rows[1][1], 1.0)


class BlockerTests(TestUtils):
    """Tests for blocker arrivals."""

    def test_no_arrivals(self):
        process = BlockerProcess()
        self.assertEqual(mobility.active_blockers(process, 3.0), [])
        self.assertIsNone(mobility.next_arrival(process, 0.0, 100.0))

    def test_periodic_arrivals(self):
        process = BlockerProcess(interval=2.0, offset=1.0)
        starts = [e.start for e in mobility.events_between(process, 0, 10)]
        self.assertEqual(starts, [1.0, 3.0, 5.0, 7.0, 9.0])
        self.assertEqual(len(mobility.events_between(process, 0, 25)), 12)
        self.assertEqual(mobility.next_arrival(process, 1.5, 10.0), 3.0)
        self.assertIsNone(mobility.next_arrival(process, 9.5, 10.0))

    def test_blocker_crosses_midpoint(self):
        process = BlockerProcess(interval=2.0, offset=1.0,
                                 duration_jitter=0.0)
        blockers = mobility.active_blockers(process, 1.1)
        self.assertEqual(len(blockers), 1)
        x, y = blockers[0].position
        self.assertAlmostEqual(x, 3.5)
        self.assertAlmostEqual(y, 0.0)
        self.assertEqual(mobility.active_blockers(process, 1.3), [])

    def test_duration_statistics(self):
        process = BlockerProcess(interval=2.0, seed=4)
        durations = [e.duration
                     for e in mobility.events_between(process, 0, 1000)]
        self.assertEqual(len(durations), 500)
        self.assertAlmostEqual(np.mean(durations), 0.2, delta=0.01)
        self.assertGreaterEqual(min(durations), 0.15)
        self.assertLessEqual(max(durations), 0.25)

    def test_poisson_counts(self):
        for seed in range(5):
            process = BlockerProcess(arrival_rate=2.0, seed=seed)
            count = len(mobility.events_between(process, 0, 100))
            self.assertAlmostEqual(count, 200, delta=60)

    def test_arrivals_are_seeded(self):
        first = BlockerProcess(arrival_rate=2.0, seed=9)
        again = BlockerProcess(arrival_rate=2.0, seed=9)
        other = BlockerProcess(arrival_rate=2.0, seed=10)
        self.assertEqual(mobility.events_between(first, 0, 30),
                         mobility.events_between(again, 0, 30))
        self.assertNotEqual(mobility.events_between(first, 0, 30),
                            mobility.events_between(other, 0, 30))

    def test_gr_availability(self):
        always = BlockerProcess(interval=1.0, gr_availability=1.0)
        never = BlockerProcess(interval=1.0, gr_availability=0.0)
        self.assertTrue(all(e.clearance == 0.8 for e in
                            mobility.events_between(always, 0, 20)))
        self.assertTrue(all(e.clearance == 0.0 for e in
                            mobility.events_between(never, 0, 20)))

    def test_invalid_process(self):
        with self.assertRaises(ConfigError):
            mobility.check_blockers(BlockerProcess(duration_jitter=1.0))
        with self.assertRaises(ConfigError):
            mobility.check_blockers(BlockerProcess(gr_availability=1.5))
        with self.assertRaises(ConfigError):
            mobility.check_blockers(BlockerProcess(interval=0.0))

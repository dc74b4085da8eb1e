"""Tests for codebooks and array gains."""

import math

import terra.array as array
from terra.errors import ConfigError, DomainError
from tests.test_all import TestUtils


def linear_book(n_beams=25, elements=12):
    geometry = array.ArrayGeometry(array.LINEAR, elements, 1)
    return array.make_codebook(geometry, (-60.0, 60.0), n_az=n_beams)


def planar_book(side=5, elements=6):
    geometry = array.ArrayGeometry(array.PLANAR, elements, elements)
    return array.make_codebook(geometry, (-50.0, 60.0), (-30.0, 45.0),
                               side, side)


class CodebookTests(TestUtils):
    """Tests for codebook synthesis."""

    def test_linear_steering_angles(self):
        book = linear_book()
        self.assertEqual(len(book), 25)
        self.assertEqual([b.steer_az for b in book.beams[:3]],
                         [-60.0, -55.0, -50.0])
        self.assertEqual(book.beams[-1].steer_az, 60.0)
        self.assertEqual([b.id for b in book.beams], list(range(25)))

    def test_planar_row_major_ids(self):
        book = planar_book()
        beam = book.beam(7)
        self.assertEqual(beam.grid_pos, (1, 2))
        self.assertAlmostEqual(beam.steer_az, 5.0)
        self.assertAlmostEqual(beam.steer_zen, -11.25)
        self.assertEqual(book.beam_at(1, 2), 7)
        self.assertTrue(book.is_planar_grid())
        self.assertFalse(linear_book().is_planar_grid())

    def test_single_beam_points_at_middle(self):
        geometry = array.ArrayGeometry()
        book = array.make_codebook(geometry, (10.0, 30.0))
        self.assertEqual(book.beam(0).steer_az, 20.0)

    def test_equal_codebooks(self):
        self.assertEqual(linear_book(), linear_book())
        self.assertEqual(hash(linear_book()), hash(linear_book()))
        self.assertNotEqual(linear_book(), linear_book(n_beams=13))

    def test_invalid_codebooks(self):
        with self.assertRaises(ConfigError):
            array.make_codebook(array.ArrayGeometry(), (-60, 60), (0, 10),
                                n_az=5, n_zen=2)
        with self.assertRaises(ConfigError):
            array.make_codebook(array.ArrayGeometry(kind="ring"), (0, 0))
        with self.assertRaises(ConfigError):
            array.make_codebook(array.ArrayGeometry(), (60, -60), n_az=5)
        with self.assertRaises(ConfigError):
            array.make_codebook(array.ArrayGeometry(elements_y=2), (0, 0))
        with self.assertRaises(ConfigError):
            array.make_codebook(array.ArrayGeometry(), (0, 0), n_az=0)

    def test_unknown_beam(self):
        with self.assertRaises(DomainError):
            array.gain(linear_book(), 25, 0.0)

    def test_codebook_rows(self):
        geometry = array.ArrayGeometry(array.PLANAR, 32, 32)
        book = array.make_codebook(geometry, (-60, 60), (-30, 30), 32, 32)
        rows = array.codebook_rows(book)
        self.assertEqual(len(rows), 1024)
        self.assertEqual(rows[0][:3], (0, 0, 0))
        self.assertEqual(rows[-1][:3], (1023, 31, 31))


class GainTests(TestUtils):
    """Tests for directional gain."""

    def test_gain_at_steering_direction(self):
        book = planar_book()
        for beam in book.beams:
            self.assertAlmostEqual(
                array.gain(book, beam.id, beam.steer_az, beam.steer_zen),
                17.0)

    def test_gains_match_gain(self):
        book = planar_book()
        values = array.gains(book, 12.0, 20.0)
        for b in range(len(book)):
            self.assertAlmostEqual(values[b], array.gain(book, b, 12.0, 20.0))

    def test_behind_array(self):
        book = linear_book()
        self.assertEqual(array.gain(book, 0, 180.0), 17.0 - 30.0)
        self.assertEqual(array.gain(book, 12, -120.0), -13.0)

    def test_sidelobe_floor(self):
        geometry = array.ArrayGeometry(array.LINEAR, 12, 1,
                                       sidelobe_floor=20.0)
        book = array.make_codebook(geometry, (0.0, 0.0))
        # First null of a 12 element half-wavelength array.
        null = math.degrees(math.asin(1 / 6))
        self.assertAlmostEqual(array.gain(book, 0, null), -3.0)

    def test_best_beam(self):
        book = linear_book()
        self.assertEqual(array.best_beam(book, 11.0), 14)
        self.assertEqual(array.best_beam(book, -60.0), 0)

    def test_best_beam_tie_goes_low(self):
        geometry = array.ArrayGeometry(array.LINEAR, 1, 1)
        book = array.make_codebook(geometry, (-60.0, 60.0), n_az=5)
        self.assertEqual(array.best_beam(book, 30.0), 0)

    def test_envelope_gain(self):
        book = linear_book()
        self.assertAlmostEqual(array.envelope_gain(book, [3, 4, 14], 10.0),
                               17.0)

    def test_wrap_angle(self):
        self.assertEqual(array.wrap_angle(190.0), -170.0)
        self.assertEqual(array.wrap_angle(-180.0), -180.0)
        self.assertEqual(array.wrap_angle(540.0), -180.0)


class NeighborTests(TestUtils):
    """Tests for grid adjacency."""

    def test_planar_corner(self):
        self.assertEqual(array.angular_neighbors(planar_book(), 0),
                         {1, 5, 6})

    def test_planar_center(self):
        neighbors = array.angular_neighbors(planar_book(), 12)
        self.assertEqual(neighbors, {6, 7, 8, 11, 13, 16, 17, 18})

    def test_linear(self):
        book = linear_book()
        self.assertEqual(array.angular_neighbors(book, 5), {4, 6})
        self.assertEqual(array.angular_neighbors(book, 24), {23})

    def test_zenith_neighbors_below(self):
        book = planar_book()
        self.assertEqual(array.zenith_neighbors_below(book, 7), [12, 17])
        self.assertEqual(array.zenith_neighbors_below(book, 17), [22])
        self.assertEqual(array.zenith_neighbors_below(book, 22), [])
        self.assertEqual(array.zenith_neighbors_below(linear_book(), 3), [])


class BeamwidthTests(TestUtils):
    """Tests for half-power beamwidths."""

    def test_linear_broadside(self):
        geometry = array.ArrayGeometry(array.LINEAR, 12, 1)
        book = array.make_codebook(geometry, (0.0, 0.0))
        width = array.half_power_beamwidth(book, 0, "az")
        self.assertAlmostEqual(width, 8.46, delta=0.3)

    def test_edges_are_half_power(self):
        book = linear_book()
        lower, upper = array.half_power_edges(book, 12, "az")
        self.assertAlmostEqual(lower, upper)
        for offset in (-lower, upper):
            self.assertAlmostEqual(array.gain(book, 12, offset),
                                   17.0 + array.HALF_POWER_DB, places=6)

    def test_steered_beam_is_wider(self):
        book = linear_book()
        self.assertGreater(array.half_power_beamwidth(book, 0),
                           array.half_power_beamwidth(book, 12))

    def test_no_zenith_beamwidth_on_linear_array(self):
        self.assertIsNone(array.half_power_beamwidth(linear_book(), 3, "zen"))

    def test_planar_zenith(self):
        book = planar_book()
        width = array.half_power_beamwidth(book, 12, "zen")
        self.assertGreater(width, 10.0)
        self.assertLess(width, 25.0)

    def test_pattern_rows(self):
        book = linear_book()
        rows = array.pattern_rows(book, [12], [-10.0, 0.0, 10.0])
        self.assertEqual([r[1] for r in rows], [-10.0, 0.0, 10.0])
        self.assertAlmostEqual(rows[1][2], 17.0)
        self.assertAlmostEqual(rows[0][2], rows[2][2])

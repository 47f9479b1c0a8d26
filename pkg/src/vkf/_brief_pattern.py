# Generated by vkf.descriptor.generate_brief_pattern(0x42); do not edit.
# Each row: (p_x, p_y, q_x, q_y) offsets from the keypoint.

BRIEF_PAIRS = (
    (3, -3, -3, -7),
    (-8, -10, 3, 7),
    (3, 2, 2, -1),
    (6, -5, 7, -1),
    (0, -8, 0, 15),
    (0, -2, 2, 6),
    (6, -4, -7, -7),
    (0, -12, 10, -4),
    (-1, 10, -6, 0),
    (-4, 4, -4, 2),
    (-5, 6, -3, -8),
    (2, -13, 10, 3),
    (2, 1, 8, 0),
    (-1, -4, 1, 10),
    (-7, 5, 1, 3),
    (9, 4, -7, -1),
    (-9, 1, -7, 9),
    (2, -15, 8, -4),
    (-5, 7, 12, 13),
    (-4, -7, 8, 2),
    (-8, 10, -1, 0),
    (-9, -1, -2, -2),
    (-7, -5, 0, -3),
    (0, 1, 1, 4),
    (1, 9, 4, -6),
    (-2, 1, -3, 7),
    (-13, 2, 3, -8),
    (-9, 14, 2, 1),
    (-6, 5, -4, -3),
    (3, 7, 0, -9),
    (-1, -9, 7, -3),
    (-6, -6, -2, 3),
    (8, 3, -10, -6),
    (3, -4, 1, -8),
    (-12, -1, 1, 8),
    (-1, 2, 11, 6),
    (-1, -5, 5, -3),
    (9, 3, 4, 10),
    (2, 4, -4, 0),
    (1, -1, 8, -3),
    (2, -7, -3, -15),
    (2, -2, -2, -7),
    (-7, -6, -5, 4),
    (-13, 15, 4, -2),
    (13, -6, 0, -13),
    (8, -3, 1, 4),
    (-9, 1, 0, 9),
    (6, -15, 2, -11),
    (-7, -3, 12, -15),
    (-4, -8, -1, 0),
    (-6, -11, 1, -5),
    (5, 6, 6, -4),
    (-8, -5, -1, 1),
    (1, 1, 5, -1),
    (7, 7, 7, -8),
    (2, -9, -5, 5),
    (3, -6, 10, 11),
    (-2, -2, -8, 1),
    (10, 7, 6, 3),
    (1, -5, -2, 1),
    (-5, -5, -4, 2),
    (-4, 3, -3, -4),
    (0, 2, 3, -8),
    (1, 1, -3, 5),
    (7, -5, 5, 9),
    (-3, -8, 6, 2),
    (0, 15, 8, -1),
    (5, 5, 6, 4),
    (-10, 2, 1, 6),
    (2, -1, 15, 4),
    (9, 0, 2, -12),
    (1, 2, -3, 3),
    (12, -3, 0, 2),
    (-3, 6, 1, -9),
    (4, -4, 5, -5),
    (4, -5, 5, 2),
    (4, 4, -1, -3),
    (-4, -1, 2, 0),
    (0, 8, 7, 0),
    (1, -8, 6, 11),
    (-6, 10, 0, -3),
    (2, -1, 2, 1),
    (-2, 2, -2, -8),
    (-3, -3, 5, -1),
    (3, -2, 8, 7),
    (-3, 2, 6, 4),
    (9, 6, -1, 6),
    (-2, -3, -1, 7),
    (-7, -3, 8, 9),
    (-7, -9, 2, 1),
    (3, 7, -2, -6),
    (1, 0, 5, -3),
    (-9, -7, -7, -10),
    (11, 1, -6, -8),
    (-4, 15, -8, 8),
    (-9, -6, 10, -4),
    (13, -6, -1, -3),
    (5, 8, 4, 2),
    (1, 15, 4, -3),
    (2, -10, 8, -8),
    (-2, -2, 0, 3),
    (8, 3, -7, -5),
    (-1, 4, 1, -1),
    (-1, -2, 3, -1),
    (1, -3, 8, -6),
    (-1, -3, -10, 8),
    (12, -3, 5, -6),
    (-5, -2, 12, -5),
    (4, 1, 4, -3),
    (-4, 1, 10, -10),
    (13, -3, 3, 2),
    (15, -11, -15, -4),
    (-11, -6, 11, 0),
    (-5, -5, -7, -1),
    (1, -7, -2, 0),
    (2, 1, -11, -5),
    (-5, 5, 1, -9),
    (0, 8, 4, 4),
    (15, 6, 2, -4),
    (0, -9, 8, 4),
    (0, -3, 1, -5),
    (-9, -7, 1, 1),
    (4, -4, -7, 1),
    (-15, 2, -3, 7),
    (-14, -8, 2, -2),
    (1, -7, -3, 0),
    (-7, 5, -2, 12),
    (-1, 3, 3, -1),
    (4, 10, 3, 3),
    (1, 7, -2, 0),
    (-7, 3, -4, 4),
    (-1, 7, -3, 8),
    (-3, 6, -2, -1),
    (2, 4, 7, -4),
    (3, 2, -4, -10),
    (3, -2, -3, -7),
    (6, 5, 8, 9),
    (5, -6, 10, 2),
    (-2, 2, -6, 2),
    (-2, 0, -2, -3),
    (-1, -8, 2, -2),
    (-2, 4, -1, 1),
    (10, -1, 8, 0),
    (-11, 8, -1, -1),
    (7, 4, -4, -1),
    (-1, -4, -7, 0),
    (-8, 1, -7, -5),
    (-5, 2, 3, -2),
    (-2, 14, 1, 9),
    (-2, -1, -5, 2),
    (-7, 5, 0, -1),
    (1, -8, -2, 0),
    (0, -3, 8, -3),
    (5, -1, -8, 2),
    (-2, 2, 4, -1),
    (-4, 9, -7, -6),
    (-2, -10, 1, -13),
    (10, 7, 3, -1),
    (-5, -2, -8, -6),
    (-2, -2, 3, -1),
    (13, 3, -7, 0),
    (-15, -10, 5, 0),
    (2, -3, -2, 9),
    (9, -4, -5, 10),
    (0, 6, 8, 7),
    (1, 1, 4, 15),
    (-2, -5, -3, -8),
    (-9, -6, 4, -5),
    (14, 6, 0, -6),
    (8, -1, -15, 11),
    (-9, -5, 6, 2),
    (-4, -1, -5, 4),
    (11, -6, -9, -3),
    (7, 7, 6, 0),
    (-3, -7, -6, 8),
    (-1, -2, -1, -10),
    (-5, -1, 6, 2),
    (3, 2, -7, -3),
    (-5, 4, -2, -2),
    (-11, 6, 3, 0),
    (0, 3, -7, -2),
    (2, -6, -2, -5),
    (-3, -9, -4, -6),
    (-7, -13, 4, -8),
    (10, 0, 4, 7),
    (6, -4, -4, 4),
    (-2, -2, 2, 3),
    (-8, 1, -8, 2),
    (-6, 3, 8, 1),
    (9, 3, -12, 2),
    (-8, 0, 2, -1),
    (2, -2, 7, 2),
    (-3, 11, 4, 4),
    (3, 0, 5, 9),
    (-3, -3, -4, 2),
    (5, 0, 4, 2),
    (-11, 0, 1, -4),
    (7, -6, -2, -2),
    (3, -2, 8, 3),
    (6, 1, 5, 1),
    (-6, 2, -4, -6),
    (0, -4, -5, 3),
    (-10, -15, 2, 15),
    (-4, 3, -9, 0),
    (7, -4, -1, -6),
    (-1, 5, -1, -9),
    (0, 1, 6, 0),
    (-8, -3, -14, 0),
    (-2, 4, 6, -10),
    (3, -1, 3, -6),
    (-11, 5, 5, -3),
    (4, -6, 5, -1),
    (-1, 1, -5, -5),
    (9, -2, 9, -8),
    (2, 0, 4, -2),
    (2, -9, -3, -6),
    (-2, 8, 7, 5),
    (-8, 1, -5, 1),
    (-2, -9, -1, 0),
    (7, -9, 4, -7),
    (7, 11, -6, -7),
    (-3, 6, -2, -1),
    (-6, 15, -6, -1),
    (0, 0, 5, 3),
    (10, 3, 2, 6),
    (-4, -1, 1, 2),
    (1, -9, 4, -7),
    (-10, 1, 3, 15),
    (-9, -1, -4, -6),
    (-10, -8, -6, 9),
    (-11, 4, -1, -7),
    (3, -3, 3, -6),
    (0, -1, 2, -11),
    (0, -4, -6, 5),
    (-1, 2, 7, -2),
    (-4, -3, -10, 4),
    (-1, 3, -2, 1),
    (9, 5, 0, 0),
    (-1, 12, 4, 13),
    (-14, -5, -5, -4),
    (6, 1, 4, 2),
    (-4, -9, 8, 12),
    (5, 2, 2, -2),
    (13, -15, 2, 1),
    (-6, 3, -7, -3),
    (2, 7, 0, -5),
    (-4, -4, 0, -7),
    (-6, -6, -9, -8),
    (-11, 1, -5, -2),
    (-9, 8, 6, -11),
    (-2, -6, 4, 4),
    (-7, 7, -6, -6),
    (-1, 2, -4, 13),
    (2, -2, -1, -4),
    (-1, 4, 8, -9),
    (-11, 1, -2, -9),
)

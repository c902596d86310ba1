"""Trajectory integration and frame rendering for moving-glyph clips."""
import numpy as np

from ..exceptions import GenerationError

SUB_ACTIONS = ("vertical", "horizontal", "diagonal")
# unit motion per sub-action along (y, x); the drawn signs multiply these
AXES = {"vertical": (1, 0), "horizontal": (0, 1), "diagonal": (1, 1)}


def bounce(pos, vel, limit):
    """Advance a 1-D point by ``vel`` inside ``[0, limit]`` with elastic walls."""
    if limit == 0:
        return 0, vel
    pos += vel
    while pos < 0 or pos > limit:
        if pos < 0:
            pos, vel = -pos, -vel
        else:
            pos, vel = 2 * limit - pos, -vel
    return pos, vel


def trajectory(start_pos, sub_actions, speed, direction_signs, d, limits):
    """Top-left glyph position for each of ``len(sub_actions) * d`` frames.

    Frame 0 sits at ``start_pos``. Frame ``f > 0`` moves from frame ``f-1``
    with the velocity of the sub-action active at ``f``. Each sub-action
    starts from its own drawn direction; reflections flip the sign of the
    velocity component that hit a wall.

    Args:
        start_pos: ``(y, x)`` of the first frame.
        sub_actions: ordered sub-action names.
        speed: pixels per frame along each moving axis.
        direction_signs: ``{name: (sign_y, sign_x)}`` with entries in ``{-1, +1}``.
        d: frames per sub-action.
        limits: largest allowed ``(y, x)``, i.e. canvas minus glyph size.
    """
    y, x = (int(v) for v in start_pos)
    out = np.empty((len(sub_actions) * d, 2), dtype=np.int64)
    out[0] = y, x
    vy = vx = 0
    for f in range(1, len(out)):
        if f % d == 0 or f == 1:
            name = sub_actions[f // d]
            ay, ax = AXES[name]
            sy, sx = direction_signs[name]
            vy, vx = ay * sy * speed, ax * sx * speed
        y, vy = bounce(y, vy, limits[0])
        x, vx = bounce(x, vx, limits[1])
        out[f] = y, x
    return out


def render_trajectory(glyph, start_pos, sub_actions, speed, direction_signs, d, canvas):
    """Render a clip of the glyph following :func:`trajectory`.

    Args:
        glyph: 2-D ``uint8`` array.
        canvas: ``(H, W)``.

    Returns:
        ``uint8`` frames of shape ``(len(sub_actions) * d, H, W)``, black
        background with the glyph copied in.
    """
    glyph = np.asarray(glyph, dtype=np.uint8)
    gh, gw = glyph.shape
    limits = (canvas[0] - gh, canvas[1] - gw)
    if min(limits) < 0:
        raise GenerationError(f"glyph {glyph.shape} does not fit canvas {tuple(canvas)}", "canvas")
    if not (0 <= start_pos[0] <= limits[0] and 0 <= start_pos[1] <= limits[1]):
        raise GenerationError(f"start position {tuple(start_pos)} puts the glyph outside the canvas",
                              "start_pos")
    pos = trajectory(start_pos, sub_actions, speed, direction_signs, d, limits)
    frames = np.zeros((len(pos), canvas[0], canvas[1]), dtype=np.uint8)
    for f, (y, x) in enumerate(pos):
        frames[f, y:y + gh, x:x + gw] = glyph
    return frames

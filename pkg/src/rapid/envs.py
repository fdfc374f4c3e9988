"""Sparse-reward environments with procedurally generated layouts.

Four kinds are provided:

* ``multiroom``: a chain of rooms connected by doors; the agent must reach
  a green goal tile in the last room.
* ``keycorridor``: a vertical corridor flanked by rooms; a ball sits behind
  a locked door and the matching key is hidden in a room on the other side.
* ``chain``: a 1-D corridor of cells; the agent starts at the left end and
  must reach the rightmost cell within the step budget.
* ``pointmass``: a 2-D box with velocity-damped double-integrator dynamics
  and a continuous action; the goal region is the opposite corner.

Grid observations are egocentric 7x7 views with three small integers per
cell (object id, color id, door state), flattened row-major (lateral
offset, depth, channel) to 147 values.  Cells hidden behind walls or
closed doors are encoded as "unseen".  Layouts are a pure function of
``(layout_seed_stream, episode_index)``.

Text snapshot legend (used by the golden layout files):
  ``#`` wall   ``.`` empty   ``G`` goal   ``K`` key   ``B`` ball
  ``+`` closed door   ``/`` open door   ``L`` locked door
  ``>`` ``v`` ``<`` ``^`` agent facing east/south/west/north
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

VIEW_SIZE = 7
GRID_OBS_DIM = VIEW_SIZE * VIEW_SIZE * 3

N_COLORS = 6


class Obj(IntEnum):
    UNSEEN = 0
    EMPTY = 1
    WALL = 2
    FLOOR = 3
    DOOR = 4
    KEY = 5
    BALL = 6
    BOX = 7
    GOAL = 8
    LAVA = 9
    AGENT = 10


class DoorState(IntEnum):
    OPEN = 0
    CLOSED = 1
    LOCKED = 2


class GridAction(IntEnum):
    LEFT = 0
    RIGHT = 1
    FORWARD = 2
    PICKUP = 3
    DROP = 4
    TOGGLE = 5
    DONE = 6


# Forward vectors indexed by heading: east, south, west, north.
DIR_VECS = ((1, 0), (0, 1), (-1, 0), (0, -1))

# plain ints for hot paths (IntEnum attribute access is surprisingly slow)
_EMPTY, _WALL, _DOOR, _KEY, _BALL, _BOX, _GOAL = (
    int(Obj.EMPTY),
    int(Obj.WALL),
    int(Obj.DOOR),
    int(Obj.KEY),
    int(Obj.BALL),
    int(Obj.BOX),
    int(Obj.GOAL),
)
_FLOOR = int(Obj.FLOOR)
_OPEN, _CLOSED, _LOCKED = int(DoorState.OPEN), int(DoorState.CLOSED), int(DoorState.LOCKED)

GOAL_COLOR = 1  # green

_ENV_KINDS = ("multiroom", "keycorridor", "chain", "pointmass")

# Upper bound on the normalized value of each observation channel.
_GRID_CHANNEL_MAX = np.array([10.0, 5.0, 2.0])


class LayoutGenerationError(RuntimeError):
    """Raised when a solvable layout cannot be generated for a seed."""

    def __init__(self, kind: str, layout_seed_stream: int, episode_index: int, detail: str):
        self.kind = kind
        self.layout_seed_stream = layout_seed_stream
        self.episode_index = episode_index
        super().__init__(
            f"layout generation failed for kind={kind} "
            f"layout_seed_stream={layout_seed_stream} episode_index={episode_index}: {detail}"
        )


@dataclass
class EnvSpec:
    """Static description of an environment family."""

    kind: str
    n_rooms: int = 2
    room_size: int = 4
    chain_length: int = 8
    max_steps: int | None = None
    step_penalty_coeff: float = 0.9
    layout_seed_stream: int = 0

    def __post_init__(self):
        if self.kind not in _ENV_KINDS:
            raise ValueError(f"unknown env kind {self.kind!r}; expected one of {_ENV_KINDS}")
        if self.kind in ("multiroom", "keycorridor"):
            if self.n_rooms < 1:
                raise ValueError("n_rooms must be >= 1")
            if self.room_size < 3:
                raise ValueError("room_size must be >= 3")
        if self.kind == "chain" and self.chain_length < 2:
            raise ValueError("chain_length must be >= 2")
        if not 0.0 <= self.step_penalty_coeff <= 1.0:
            raise ValueError("step_penalty_coeff must be in [0, 1]")
        if self.layout_seed_stream < 0:
            raise ValueError("layout_seed_stream must be non-negative")
        if self.max_steps is None:
            self.max_steps = self.default_max_steps()
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")

    def default_max_steps(self) -> int:
        if self.kind == "multiroom":
            return 20 * self.n_rooms
        if self.kind == "keycorridor":
            return 30 * self.room_size**2
        if self.kind == "chain":
            return self.chain_length - 1
        return 100  # pointmass


@dataclass
class Transition:
    obs: np.ndarray
    action: int | np.ndarray
    reward: float
    done: bool


@dataclass
class Episode:
    """One complete episode: the transitions plus the final observation.

    ``observations()`` returns every state the agent occupied, i.e. the
    observation at each decision point followed by the state the last
    action led to.
    """

    transitions: list[Transition] = field(default_factory=list)
    episode_seed: int = 0
    final_obs: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.transitions)

    def observations(self) -> list[np.ndarray]:
        obs = [t.obs for t in self.transitions]
        if self.final_obs is not None:
            obs.append(self.final_obs)
        return obs

    def total_reward(self) -> float:
        return float(sum(t.reward for t in self.transitions))


def _layout_rng(spec: EnvSpec, episode_index: int) -> np.random.Generator:
    if episode_index < 0:
        raise ValueError("episode_index must be non-negative")
    return np.random.default_rng(
        np.random.SeedSequence([spec.layout_seed_stream, episode_index])
    )


# ---------------------------------------------------------------------------
# grid worlds


def _visibility_mask(blocked: list[list[bool]]) -> list[list[bool]]:
    """Flood visibility outward from the agent cell of a 7x7 view.

    Walls and non-open doors are opaque; light spreads from the near row
    toward the far row, one diagonal per row.
    """
    n = VIEW_SIZE
    mask = [[False] * n for _ in range(n)]
    mask[n // 2][n - 1] = True
    for v in range(n - 1, -1, -1):
        for u in range(n - 1):
            if mask[u][v] and not blocked[u][v]:
                nxt = mask[u + 1]
                nxt[v] = True
                if v > 0:
                    nxt[v - 1] = True
                    mask[u][v - 1] = True
        for u in range(n - 1, 0, -1):
            if mask[u][v] and not blocked[u][v]:
                prv = mask[u - 1]
                prv[v] = True
                if v > 0:
                    prv[v - 1] = True
                    mask[u][v - 1] = True
    return mask


def _view_offsets():
    """World-coordinate offsets of every view cell, per agent heading."""
    us = np.arange(VIEW_SIZE)[:, None]
    vs = np.arange(VIEW_SIZE)[None, :]
    fwd = VIEW_SIZE - 1 - vs  # cells in front of the agent
    right = us - VIEW_SIZE // 2  # cells to the agent's right
    offs = []
    for fx, fy in DIR_VECS:
        rx, ry = -fy, fx
        offs.append((fwd * fx + right * rx, fwd * fy + right * ry))
    return offs


_VIEW_OFFSETS = _view_offsets()
_PAD = VIEW_SIZE - 1  # world arrays carry a wall apron this thick


class GridWorld:
    """Shared mechanics for the multiroom and keycorridor worlds.

    The world is three (width, height) uint8 arrays: object id, color id
    and door state.  The agent occupies one cell with a heading and may
    carry at most one object.
    """

    n_actions = 7
    continuous = False
    obs_dim = GRID_OBS_DIM

    def __init__(self, spec: EnvSpec):
        self.spec = spec
        self.obs_scale = np.tile(_GRID_CHANNEL_MAX, VIEW_SIZE * VIEW_SIZE)
        self.obj: np.ndarray | None = None
        self.color: np.ndarray | None = None
        self.state: np.ndarray | None = None
        self._pworld: np.ndarray | None = None
        self.agent_pos = (0, 0)
        self.agent_dir = 0
        self.carrying: tuple[int, int] | None = None
        self.steps = 0
        self.done = True
        self.episode_index = -1

    # -- layout generation (per kind) ---------------------------------

    def _generate(self, rng: np.random.Generator) -> None:
        raise NotImplementedError

    def _success(self) -> bool:
        raise NotImplementedError

    def _blank(self, width: int, height: int) -> None:
        # one padded 3-channel backing store lets the view gather use a
        # single fancy index with no bounds checks; obj/color/state are
        # live views of the interior
        self._pworld = np.zeros((width + 2 * _PAD, height + 2 * _PAD, 3), dtype=np.uint8)
        self._pworld[..., 0] = Obj.WALL
        self.obj = self._pworld[_PAD:-_PAD, _PAD:-_PAD, 0]
        self.color = self._pworld[_PAD:-_PAD, _PAD:-_PAD, 1]
        self.state = self._pworld[_PAD:-_PAD, _PAD:-_PAD, 2]

    # -- episode API ---------------------------------------------------

    def reset(self, episode_index: int) -> np.ndarray:
        rng = _layout_rng(self.spec, episode_index)
        self.episode_index = episode_index
        self.carrying = None
        self.steps = 0
        self.done = False
        self._generate(rng)
        return self.encode_observation()

    def step(self, action) -> tuple[np.ndarray, float, bool]:
        if self.done:
            raise RuntimeError("step() called on a finished episode")
        act = int(action)
        if not 0 <= act < 7:
            raise ValueError(f"grid action must be in [0, 7), got {act}")
        self.steps += 1
        ax, ay = self.agent_pos
        dx, dy = DIR_VECS[self.agent_dir]
        fx, fy = ax + dx, ay + dy
        fobj = int(self.obj[fx, fy])

        if act == 0:  # turn left
            self.agent_dir = (self.agent_dir - 1) % 4
        elif act == 1:  # turn right
            self.agent_dir = (self.agent_dir + 1) % 4
        elif act == 2:  # forward
            if self._walkable(fx, fy):
                self.agent_pos = (fx, fy)
        elif act == 3:  # pickup
            if self.carrying is None and fobj in (_KEY, _BALL, _BOX):
                self.carrying = (fobj, int(self.color[fx, fy]))
                self.obj[fx, fy] = _EMPTY
                self.color[fx, fy] = 0
        elif act == 4:  # drop
            if self.carrying is not None and fobj == _EMPTY:
                self.obj[fx, fy], self.color[fx, fy] = self.carrying
                self.carrying = None
        elif act == 5:  # toggle
            if fobj == _DOOR:
                st = int(self.state[fx, fy])
                if st == _OPEN:
                    self.state[fx, fy] = _CLOSED
                elif st == _CLOSED:
                    self.state[fx, fy] = _OPEN
                elif st == _LOCKED:
                    if self.carrying == (_KEY, int(self.color[fx, fy])):
                        self.state[fx, fy] = _OPEN
        # act 6 ("done") has no effect

        reward = 0.0
        if self._success():
            reward = 1.0 - self.spec.step_penalty_coeff * self.steps / self.spec.max_steps
            self.done = True
        elif self.steps >= self.spec.max_steps:
            self.done = True
        return self.encode_observation(), reward, self.done

    def _walkable(self, x: int, y: int) -> bool:
        o = int(self.obj[x, y])
        if o == _EMPTY or o == _FLOOR or o == _GOAL:
            return True
        return o == _DOOR and int(self.state[x, y]) == _OPEN

    # -- observation ---------------------------------------------------

    def encode_observation(self) -> np.ndarray:
        ax, ay = self.agent_pos
        offx, offy = _VIEW_OFFSETS[self.agent_dir]
        out = self._pworld[offx + (ax + _PAD), offy + (ay + _PAD)]  # fresh (7, 7, 3)

        # The agent's own cell shows what it carries, not what it stands on.
        c = VIEW_SIZE // 2, VIEW_SIZE - 1
        out[c] = (*self.carrying, 0) if self.carrying is not None else (_EMPTY, 0, 0)

        vobj = out[..., 0]
        blocked = ((vobj == _WALL) | ((vobj == _DOOR) & (out[..., 2] != _OPEN))).tolist()
        out[~np.array(_visibility_mask(blocked))] = 0
        return out.reshape(-1)

    def render_text(self) -> str:
        chars = {
            int(Obj.WALL): "#",
            int(Obj.EMPTY): ".",
            int(Obj.GOAL): "G",
            int(Obj.KEY): "K",
            int(Obj.BALL): "B",
        }
        door_chars = {
            int(DoorState.OPEN): "/",
            int(DoorState.CLOSED): "+",
            int(DoorState.LOCKED): "L",
        }
        w, h = self.obj.shape
        rows = []
        for y in range(h):
            row = []
            for x in range(w):
                if (x, y) == self.agent_pos:
                    row.append(">v<^"[self.agent_dir])
                elif self.obj[x, y] == Obj.DOOR:
                    row.append(door_chars[int(self.state[x, y])])
                else:
                    row.append(chars.get(int(self.obj[x, y]), "?"))
            rows.append("".join(row))
        return "\n".join(rows) + "\n"

    @classmethod
    def from_arrays(cls, spec, obj, color, state, agent_pos, agent_dir, carrying=None):
        """Build a world from explicit arrays; used by tests and tooling."""
        env = cls(spec)
        obj = np.asarray(obj, dtype=np.uint8)
        env._blank(*obj.shape)
        env.obj[...] = obj
        env.color[...] = np.asarray(color, dtype=np.uint8)
        env.state[...] = np.asarray(state, dtype=np.uint8)
        env.agent_pos = tuple(agent_pos)
        env.agent_dir = int(agent_dir)
        env.carrying = carrying
        env.steps = 0
        env.done = False
        return env


def _rects_overlap(a, b) -> bool:
    ax, ay, asz = a
    bx, by, bsz = b
    return ax < bx + bsz - 1 and bx < ax + asz - 1 and ay < by + bsz - 1 and by < ay + asz - 1


class MultiRoomEnv(GridWorld):
    """Rooms chained by single doors; a green goal tile in the last room."""

    _LAYOUT_ATTEMPTS = 200

    def __init__(self, spec: EnvSpec):
        super().__init__(spec)
        side = max(25, (spec.room_size - 1) * spec.n_rooms + 3)
        self._side = side

    def _generate(self, rng: np.random.Generator) -> None:
        n, sz = self.spec.n_rooms, self.spec.room_size
        for _ in range(self._LAYOUT_ATTEMPTS):
            placed = self._try_place_rooms(rng, n, sz)
            if placed is not None:
                rooms, doors = placed
                break
        else:
            raise LayoutGenerationError(
                self.spec.kind,
                self.spec.layout_seed_stream,
                self.episode_index,
                f"could not place {n} rooms of size {sz} on a {self._side}x{self._side} grid",
            )

        self._blank(self._side, self._side)
        for rx, ry in rooms:
            self.obj[rx + 1 : rx + sz - 1, ry + 1 : ry + sz - 1] = Obj.EMPTY
        prev_color = -1
        for dx, dy in doors:
            color = int(rng.integers(N_COLORS))
            if color == prev_color:
                color = (color + 1) % N_COLORS
            prev_color = color
            self.obj[dx, dy] = Obj.DOOR
            self.color[dx, dy] = color
            self.state[dx, dy] = DoorState.CLOSED

        gx, gy = self._random_interior(rng, rooms[-1])
        self.obj[gx, gy] = Obj.GOAL
        self.color[gx, gy] = GOAL_COLOR
        starts = self._interior_cells(rooms[0])
        starts = [c for c in starts if self.obj[c] == Obj.EMPTY]
        if not starts:
            raise LayoutGenerationError(
                self.spec.kind,
                self.spec.layout_seed_stream,
                self.episode_index,
                "no free start cell in the first room",
            )
        self.agent_pos = starts[int(rng.integers(len(starts)))]
        self.agent_dir = int(rng.integers(4))

    def _interior_cells(self, room) -> list[tuple[int, int]]:
        rx, ry = room
        sz = self.spec.room_size
        return [
            (x, y)
            for x in range(rx + 1, rx + sz - 1)
            for y in range(ry + 1, ry + sz - 1)
        ]

    def _random_interior(self, rng, room) -> tuple[int, int]:
        rx, ry = room
        sz = self.spec.room_size
        return (
            int(rng.integers(rx + 1, rx + sz - 1)),
            int(rng.integers(ry + 1, ry + sz - 1)),
        )

    def _try_place_rooms(self, rng, n, sz):
        side = self._side
        rooms = [
            (
                int(rng.integers(0, side - sz + 1)),
                int(rng.integers(0, side - sz + 1)),
            )
        ]
        doors = []
        for _ in range(n - 1):
            px, py = rooms[-1]
            for _ in range(12):
                d = int(rng.integers(4))
                off = int(rng.integers(-(sz - 3), sz - 2))
                dx, dy = DIR_VECS[d]
                nx = px + dx * (sz - 1) + (off if dx == 0 else 0)
                ny = py + dy * (sz - 1) + (off if dy == 0 else 0)
                if not (0 <= nx <= side - sz and 0 <= ny <= side - sz):
                    continue
                rect = (nx, ny, sz)
                if any(_rects_overlap(rect, (ox, oy, sz)) for ox, oy in rooms):
                    continue
                # door goes on the shared wall where both interiors touch it
                if dx != 0:
                    wall_x = px + (sz - 1 if dx > 0 else 0)
                    lo = max(py, ny) + 1
                    hi = min(py, ny) + sz - 2
                    door = (wall_x, int(rng.integers(lo, hi + 1)))
                else:
                    wall_y = py + (sz - 1 if dy > 0 else 0)
                    lo = max(px, nx) + 1
                    hi = min(px, nx) + sz - 2
                    door = (int(rng.integers(lo, hi + 1)), wall_y)
                rooms.append((nx, ny))
                doors.append(door)
                break
            else:
                return None
        return rooms, doors

    def _success(self) -> bool:
        return int(self.obj[self.agent_pos]) == _GOAL


class KeyCorridorEnv(GridWorld):
    """Corridor with side rooms; the target ball is behind a locked door.

    The middle column of a 3 x n_rooms room grid is merged into one
    corridor.  Each side room connects to the corridor by a single door;
    exactly one right-hand room is locked and holds the ball, and the
    matching key lies in a random left-hand room.  Picking up the ball
    ends the episode.
    """

    def _generate(self, rng: np.random.Generator) -> None:
        sz, rows = self.spec.room_size, self.spec.n_rooms
        pitch = sz - 1
        width = 3 * pitch + 1
        height = rows * pitch + 1
        self._blank(width, height)

        for col in range(3):
            for row in range(rows):
                x0, y0 = col * pitch, row * pitch
                self.obj[x0 + 1 : x0 + sz - 1, y0 + 1 : y0 + sz - 1] = Obj.EMPTY
        # merge the middle column into one corridor
        for row in range(1, rows):
            self.obj[pitch + 1 : 2 * pitch, row * pitch] = Obj.EMPTY

        target_row = int(rng.integers(rows))
        lock_color = int(rng.integers(N_COLORS))

        def add_door(x, row, locked, color):
            y = int(rng.integers(row * pitch + 1, row * pitch + sz - 1))
            self.obj[x, y] = Obj.DOOR
            self.color[x, y] = color
            self.state[x, y] = DoorState.LOCKED if locked else DoorState.CLOSED

        for row in range(rows):
            add_door(pitch, row, False, int(rng.integers(N_COLORS)))
            locked = row == target_row
            add_door(2 * pitch, row, locked, lock_color if locked else int(rng.integers(N_COLORS)))

        def place_in_room(col, row, obj_id, color):
            while True:
                x = int(rng.integers(col * pitch + 1, col * pitch + sz - 1))
                y = int(rng.integers(row * pitch + 1, row * pitch + sz - 1))
                if self.obj[x, y] == Obj.EMPTY:
                    self.obj[x, y] = obj_id
                    self.color[x, y] = color
                    return

        place_in_room(0, int(rng.integers(rows)), Obj.KEY, lock_color)
        place_in_room(2, target_row, Obj.BALL, int(rng.integers(N_COLORS)))

        mid_row = rows // 2
        while True:
            x = int(rng.integers(pitch + 1, 2 * pitch))
            y = int(rng.integers(mid_row * pitch + 1, mid_row * pitch + sz - 1))
            if self.obj[x, y] == Obj.EMPTY:
                break
        self.agent_pos = (x, y)
        self.agent_dir = int(rng.integers(4))

    def _success(self) -> bool:
        return self.carrying is not None and self.carrying[0] == _BALL


class ChainEnv:
    """1-D corridor: start at cell 0, goal at the rightmost cell.

    Observations are one-hot position vectors; two actions (left, right).
    The layout is the same every episode, which keeps the environment an
    intentionally small diagnostic task.
    """

    n_actions = 2
    continuous = False

    def __init__(self, spec: EnvSpec):
        self.spec = spec
        self.obs_dim = spec.chain_length
        self.num_states = spec.chain_length
        self.obs_scale = np.ones(spec.chain_length)
        self.pos = 0
        self.steps = 0
        self.done = True
        self.episode_index = -1

    def reset(self, episode_index: int) -> np.ndarray:
        _layout_rng(self.spec, episode_index)  # validates the index
        self.episode_index = episode_index
        self.pos = 0
        self.steps = 0
        self.done = False
        return self.encode_observation()

    def step(self, action) -> tuple[np.ndarray, float, bool]:
        if self.done:
            raise RuntimeError("step() called on a finished episode")
        a = int(action)
        if a not in (0, 1):
            raise ValueError(f"chain action must be 0 or 1, got {a}")
        self.steps += 1
        self.pos = min(max(self.pos + (1 if a == 1 else -1), 0), self.spec.chain_length - 1)
        reward = 0.0
        if self.pos == self.spec.chain_length - 1:
            reward = 1.0
            self.done = True
        elif self.steps >= self.spec.max_steps:
            self.done = True
        return self.encode_observation(), reward, self.done

    def encode_observation(self) -> np.ndarray:
        obs = np.zeros(self.spec.chain_length, dtype=np.uint8)
        obs[self.pos] = 1
        return obs

    def render_text(self) -> str:
        cells = ["."] * self.spec.chain_length
        cells[-1] = "G"
        cells[self.pos] = ">"
        return "".join(cells) + "\n"


class PointMassEnv:
    """Sparse continuous control in the unit box.

    State is (x, y, vx, vy); the action is a 2-D acceleration in
    [-1, 1]^2.  Reaching the goal circle in the opposite corner yields the
    only reward.
    """

    continuous = True
    obs_dim = 4
    action_dim = 2

    dt = 0.1
    damping = 0.9
    vmax = 0.3
    start = (0.1, 0.1)
    goal = (0.9, 0.9)
    goal_radius = 0.1

    def __init__(self, spec: EnvSpec):
        self.spec = spec
        self.obs_scale = np.ones(4)
        self.pos = np.zeros(2)
        self.vel = np.zeros(2)
        self.steps = 0
        self.done = True
        self.episode_index = -1

    def reset(self, episode_index: int) -> np.ndarray:
        _layout_rng(self.spec, episode_index)
        self.episode_index = episode_index
        self.pos = np.array(self.start, dtype=float)
        self.vel = np.zeros(2)
        self.steps = 0
        self.done = False
        return self.encode_observation()

    def step(self, action) -> tuple[np.ndarray, float, bool]:
        if self.done:
            raise RuntimeError("step() called on a finished episode")
        a = np.clip(np.asarray(action, dtype=float).reshape(2), -1.0, 1.0)
        self.steps += 1
        self.vel = np.clip(self.damping * self.vel + a * self.dt, -self.vmax, self.vmax)
        self.pos = self.pos + self.vel * self.dt
        for i in range(2):
            if self.pos[i] < 0.0 or self.pos[i] > 1.0:
                self.pos[i] = min(max(self.pos[i], 0.0), 1.0)
                self.vel[i] = 0.0
        reward = 0.0
        if float(np.hypot(*(self.pos - self.goal))) <= self.goal_radius:
            reward = 1.0 - self.steps / self.spec.max_steps
            self.done = True
        elif self.steps >= self.spec.max_steps:
            self.done = True
        return self.encode_observation(), reward, self.done

    def encode_observation(self) -> np.ndarray:
        return np.concatenate([self.pos, self.vel])


def make_env(spec: EnvSpec):
    if spec.kind == "multiroom":
        return MultiRoomEnv(spec)
    if spec.kind == "keycorridor":
        return KeyCorridorEnv(spec)
    if spec.kind == "chain":
        return ChainEnv(spec)
    return PointMassEnv(spec)

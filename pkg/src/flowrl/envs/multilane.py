"""Simplified multi-lane driving environment.

A straight three-lane road along +x.  The ego vehicle follows kinematic
bicycle dynamics driven by increment actions [d_accel, d_steer]; surrounding
traffic holds lane centers at sampled speeds with simple distance keeping
(no lane changes).  The reward combines reference tracking, control and
comfort penalties, a liveness term, and safety costs for tailgating, blind-
spot proximity and road-edge encroachment; collisions and leaving the road
terminate with a flat penalty.

Observation layout (length 5 + 4*W + 6*M = 113 for W=10, M=8):
  [v_x, v_y, yaw_rate, a_x, delta]                       ego block
  W waypoints x [x, y, cos(heading), sin(heading)]       ego-frame reference
  M slots x [x, y, cos(heading), sin(heading), v, mask]  surrounding vehicles

Several penalty shapes (the Huber-like h, the blind-spot proximity, the
boundary encroachment distance) are environment-defining choices documented
here and pinned by tests; see the module constants for every weight.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .base import EnvStep, huber_like, wrap_angle

logger = logging.getLogger(__name__)

DT = 0.1
WHEELBASE = 2.7
LANE_WIDTH = 3.75
NUM_LANES = 3
ROAD_WIDTH = LANE_WIDTH * NUM_LANES
CAR_LENGTH = 4.5
CAR_WIDTH = 1.8
EPISODE_LIMIT = 400
ROUTE_LENGTH = 120.0
MAX_SPEED = 8.0
SENSE_RANGE = 40.0
NUM_WAYPOINTS = 10
WAYPOINT_SPACING = 2.0
NUM_SLOTS = 8
DENSITY_COUNTS = {"sparse": 3, "normal": 6, "dense": 8}

# Action/state bounds
D_ACCEL_LOW, D_ACCEL_HIGH = -0.4, 0.25
D_STEER_LOW, D_STEER_HIGH = -0.025, 0.025
ACCEL_LOW, ACCEL_HIGH = -0.8, 0.8
STEER_LOW, STEER_HIGH = -0.571, 0.571

# Reward and cost weights
RHO_LAT = 1.5
RHO_LONG = 3.0
RHO_PHI = 0.3
RHO_ACC = 1.0
RHO_STEER = 0.1
RHO_YAW = 0.7
RHO_JERK = 0.5
RHO_DSTEER = 0.005
RHO_STEP = 1.0
RHO_FRONT = 10.0
RHO_SPACE = 2.0
RHO_SIDE = 0.0
RHO_REAR = 0.0
RHO_BOUNDARY = 20.0
DT_SAFE = 1.0
D_THRESH = 0.5
TERMINAL_PENALTY = 200.0

# Blind-spot proximity zone (environment-defining shape)
SPACE_ZONE_X = 6.0
SPACE_ZONE_NORM = 8.0


@dataclass
class EgoState:
    """Ego vehicle pose and actuator state.

    v_x/v_y are body-frame velocities at the center of gravity; r is the yaw
    rate.  a_x and delta persist across steps and are moved by increments.
    """

    x: float
    y: float
    phi: float
    v: float          # speed along the velocity vector at the CG
    a_x: float
    delta: float

    @property
    def slip(self) -> float:
        return float(np.arctan(0.5 * np.tan(self.delta)))

    @property
    def v_x(self) -> float:
        return self.v * float(np.cos(self.slip))

    @property
    def v_y(self) -> float:
        return self.v * float(np.sin(self.slip))

    @property
    def yaw_rate(self) -> float:
        return self.v * float(np.cos(self.slip)) * float(np.tan(self.delta)) / WHEELBASE


@dataclass
class TrafficCar:
    x: float
    lane: int
    speed: float
    desired_speed: float

    @property
    def y(self) -> float:
        return lane_center(self.lane)


def lane_center(lane: int) -> float:
    return (lane + 0.5) * LANE_WIDTH


def lane_of(y: float) -> int:
    return int(np.clip(np.floor(y / LANE_WIDTH), 0, NUM_LANES - 1))


def tracking_reward(e_lat: float, e_v: float, e_phi: float) -> float:
    """Reference-tracking penalty with the Huber-like shape on each error."""
    return (-RHO_LAT * huber_like(e_lat)
            - RHO_LONG * huber_like(e_v)
            - RHO_PHI * huber_like(e_phi))


def control_cost(a_x: float, delta: float, delta_nom: float = 0.0) -> float:
    """Cubic acceleration penalty plus steering offset from nominal."""
    return -RHO_ACC * abs(a_x) ** 3 - RHO_STEER * abs(delta - delta_nom)


def comfort_reward(yaw_rate: float, jerk: float, steer_rate: float) -> float:
    """Penalty on abrupt dynamics: yaw rate, longitudinal jerk, steering rate."""
    return (-RHO_YAW * huber_like(yaw_rate)
            - RHO_JERK * huber_like(jerk)
            - RHO_DSTEER * huber_like(steer_rate))


def liveness_reward(v_x: float) -> float:
    return RHO_STEP * (1.0 / 3.0) * float(np.clip(v_x, 0.0, 3.0))


def front_cost(gap: float, v_x: float) -> float:
    """Tailgating cost for the nearest in-lane leader; 0 with no leader.

    gap is the bumper-to-bumper distance; at gap = v_x * DT_SAFE the cost is
    RHO_FRONT * (1 - tanh(1)).  A crawling ego (v_x below 0.5) is considered
    safe regardless of gap.
    """
    if v_x < 0.5:
        return 0.0
    return RHO_FRONT * (1.0 - float(np.tanh(max(gap, 0.0) / (v_x * DT_SAFE))))


def boundary_cost(d_edge: float) -> float:
    """Road-edge encroachment cost.

    d_edge is the distance from the car side to the nearest road edge.  With
    encroachment d_bound = D_THRESH - d_edge (positive once inside the
    threshold band), the cost is RHO_BOUNDARY * max(0, d_bound - D_THRESH + 1)
    gated on d_bound > 0, i.e. 20 * (1 - d_edge) within half a meter of the
    edge and 0 outside.
    """
    d_bound = D_THRESH - d_edge
    if d_bound <= 0.0:
        return 0.0
    return RHO_BOUNDARY * max(0.0, d_bound - D_THRESH + 1.0)


def space_cost(dx: float, dy: float) -> float:
    """Blind-spot proximity for one adjacent-lane vehicle."""
    if abs(dx) >= SPACE_ZONE_X:
        return 0.0
    d = float(np.hypot(dx, dy))
    return RHO_SPACE * max(0.0, 1.0 - d / SPACE_ZONE_NORM)


class MultiLaneEnv:
    """Straight multi-lane driving with reference tracking and traffic."""

    action_low = np.array([D_ACCEL_LOW, D_STEER_LOW])
    action_high = np.array([D_ACCEL_HIGH, D_STEER_HIGH])
    observation_dim = 5 + 4 * NUM_WAYPOINTS + 6 * NUM_SLOTS
    max_episode_steps = EPISODE_LIMIT
    dt = DT

    def __init__(self, density: str = "normal"):
        if density not in DENSITY_COUNTS:
            raise ValueError(f"density must be one of {sorted(DENSITY_COUNTS)}")
        self.density = density
        self.num_traffic = DENSITY_COUNTS[density]
        self.ego = EgoState(x=0.0, y=lane_center(0), phi=0.0, v=0.0, a_x=0.0, delta=0.0)
        self.traffic: list[TrafficCar] = []
        self.ref_lane = 0
        self.target_speed = 3.0
        self.goal_x = ROUTE_LENGTH
        self.steps = 0
        self.prev_a_x = 0.0
        self.prev_delta = 0.0

    # ------------------------------------------------------------- reset

    def reset(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        ego_lane = int(rng.integers(0, NUM_LANES))
        self.ego = EgoState(
            x=0.0,
            y=lane_center(ego_lane) + float(rng.uniform(-0.3, 0.3)),
            phi=float(rng.uniform(-0.05, 0.05)),
            v=float(rng.uniform(2.0, 4.0)),
            a_x=0.0,
            delta=0.0,
        )
        # Reference from the current or an adjacent lane, random target speed.
        candidates = [ego_lane]
        if ego_lane > 0:
            candidates.append(ego_lane - 1)
        if ego_lane < NUM_LANES - 1:
            candidates.append(ego_lane + 1)
        self.ref_lane = int(candidates[rng.integers(0, len(candidates))])
        self.target_speed = float(rng.uniform(2.5, 5.0))
        self.goal_x = ROUTE_LENGTH

        # Traffic at random lane/longitudinal offsets with per-lane separation.
        self.traffic = []
        occupied: dict[int, list[float]] = {lane: [] for lane in range(NUM_LANES)}
        occupied[ego_lane].append(self.ego.x)
        attempts = 0
        while len(self.traffic) < self.num_traffic and attempts < 200:
            attempts += 1
            lane = int(rng.integers(0, NUM_LANES))
            if rng.random() < 0.15:
                x = float(rng.uniform(-25.0, -8.0))
            else:
                x = float(rng.uniform(8.0, 90.0))
            if any(abs(x - other) < 14.0 for other in occupied[lane]):
                continue
            speed = float(rng.uniform(1.5, 4.0))
            self.traffic.append(TrafficCar(x=x, lane=lane, speed=speed, desired_speed=speed))
            occupied[lane].append(x)

        self.steps = 0
        self.prev_a_x = 0.0
        self.prev_delta = 0.0
        return self.observe()

    # ------------------------------------------------------------ observe

    def observe(self) -> np.ndarray:
        ego = self.ego
        obs = np.zeros(self.observation_dim)
        obs[0:5] = [ego.v_x, ego.v_y, ego.yaw_rate, ego.a_x, ego.delta]

        # Reference waypoints ahead along the lane center, in the ego frame.
        cos_p, sin_p = np.cos(-ego.phi), np.sin(-ego.phi)
        y_ref = lane_center(self.ref_lane)
        base = 5
        for j in range(NUM_WAYPOINTS):
            wx = ego.x + WAYPOINT_SPACING * (j + 1)
            dx, dy = wx - ego.x, y_ref - ego.y
            rx = cos_p * dx - sin_p * dy
            ry = sin_p * dx + cos_p * dy
            heading = -ego.phi  # reference heading is 0 on a straight road
            obs[base + 4 * j: base + 4 * j + 4] = [rx, ry, np.cos(heading), np.sin(heading)]

        # Surrounding vehicles, nearest first, masked beyond the live count.
        base = 5 + 4 * NUM_WAYPOINTS
        visible = [c for c in self.traffic if abs(c.x - ego.x) <= SENSE_RANGE]
        visible.sort(key=lambda c: np.hypot(c.x - ego.x, c.y - ego.y))
        for k, car in enumerate(visible[:NUM_SLOTS]):
            dx, dy = car.x - ego.x, car.y - ego.y
            rx = cos_p * dx - sin_p * dy
            ry = sin_p * dx + cos_p * dy
            heading = -ego.phi
            obs[base + 6 * k: base + 6 * k + 6] = [rx, ry, np.cos(heading),
                                                   np.sin(heading), car.speed, 1.0]
        return obs

    # --------------------------------------------------------------- step

    def step(self, action) -> EnvStep:
        a = np.asarray(action, dtype=np.float64).reshape(-1)
        if a.shape[0] != 2:
            raise ValueError(f"action must have 2 entries, got {a.shape[0]}")
        if np.any(a < self.action_low) or np.any(a > self.action_high):
            logger.warning("multilane action %s outside bounds; clamped", a)
            a = np.clip(a, self.action_low, self.action_high)

        ego = self.ego
        self.prev_a_x = ego.a_x
        self.prev_delta = ego.delta

        ego.a_x = float(np.clip(ego.a_x + a[0], ACCEL_LOW, ACCEL_HIGH))
        ego.delta = float(np.clip(ego.delta + a[1], STEER_LOW, STEER_HIGH))
        ego.v = float(np.clip(ego.v + ego.a_x * DT, 0.0, MAX_SPEED))

        beta = ego.slip
        ego.x += ego.v * float(np.cos(ego.phi + beta)) * DT
        ego.y += ego.v * float(np.sin(ego.phi + beta)) * DT
        ego.phi = wrap_angle(ego.phi + ego.yaw_rate * DT)
        if not all(np.isfinite(v) for v in (ego.x, ego.y, ego.phi, ego.v)):
            raise FloatingPointError("ego state became non-finite")

        self._advance_traffic()
        self.steps += 1

        components = self._reward_components(a)
        collision = self._check_collision()
        off_road = self._check_off_road()
        arrived = ego.x >= self.goal_x
        if collision or off_road:
            components["terminal"] = -TERMINAL_PENALTY
        else:
            components["terminal"] = 0.0

        reward = float(sum(components.values()))
        truncated = (not (collision or off_road or arrived)) and self.steps >= EPISODE_LIMIT
        done = collision or off_road or arrived or truncated
        info = {"components": components, "collision": collision, "off_road": off_road,
                "arrived": arrived, "truncated": truncated}
        return EnvStep(observation=self.observe(), reward=reward, done=done, info=info)

    def _advance_traffic(self) -> None:
        """Constant desired speed with proportional distance keeping; the ego
        counts as a leader for traffic in its lane."""
        ego_lane = lane_of(self.ego.y)
        for car in self.traffic:
            leader_x, leader_speed = None, 0.0
            for other in self.traffic:
                if other is car or other.lane != car.lane or other.x <= car.x:
                    continue
                if leader_x is None or other.x < leader_x:
                    leader_x, leader_speed = other.x, other.speed
            if car.lane == ego_lane and self.ego.x > car.x:
                if leader_x is None or self.ego.x < leader_x:
                    leader_x, leader_speed = self.ego.x, self.ego.v_x

            v_cmd = car.desired_speed
            if leader_x is not None:
                gap = leader_x - car.x - CAR_LENGTH
                gap_ref = 1.5 * car.speed + 4.0
                if gap < 0.5:
                    v_cmd = 0.0
                elif gap < gap_ref:
                    v_cmd = min(car.desired_speed, leader_speed * gap / gap_ref)
            car.speed = float(np.clip(car.speed + np.clip(v_cmd - car.speed,
                                                          -2.0 * DT, 1.0 * DT),
                                      0.0, MAX_SPEED))
            car.x += car.speed * DT

    def _reward_components(self, action) -> dict:
        ego = self.ego
        e_lat = ego.y - lane_center(self.ref_lane)
        e_v = ego.v_x - self.target_speed
        e_phi = wrap_angle(ego.phi)
        jerk = (ego.a_x - self.prev_a_x) / DT
        steer_rate = (ego.delta - self.prev_delta) / DT

        components = {
            "tracking_lat": -RHO_LAT * huber_like(e_lat),
            "tracking_speed": -RHO_LONG * huber_like(e_v),
            "tracking_heading": -RHO_PHI * huber_like(e_phi),
            "control_accel": -RHO_ACC * abs(ego.a_x) ** 3,
            "control_steer": -RHO_STEER * abs(ego.delta - 0.0),
            "comfort_yaw": -RHO_YAW * huber_like(ego.yaw_rate),
            "comfort_jerk": -RHO_JERK * huber_like(jerk),
            "comfort_steer_rate": -RHO_DSTEER * huber_like(steer_rate),
            "liveness": liveness_reward(ego.v_x),
        }
        components.update(self._safety_costs())
        return components

    def _safety_costs(self) -> dict:
        ego = self.ego
        ego_lane = lane_of(ego.y)

        c_front = 0.0
        leader_gap = None
        for car in self.traffic:
            if abs(car.x - ego.x) > SENSE_RANGE or car.x <= ego.x:
                continue
            if abs(car.y - ego.y) < LANE_WIDTH / 2.0:
                gap = car.x - ego.x - CAR_LENGTH
                if leader_gap is None or gap < leader_gap:
                    leader_gap = gap
        if leader_gap is not None:
            c_front = front_cost(leader_gap, ego.v_x)

        c_space = 0.0
        for car in self.traffic:
            if car.lane == ego_lane:
                continue
            c_space = max(c_space, space_cost(car.x - ego.x, car.y - ego.y))

        d_edge = min(ego.y, ROAD_WIDTH - ego.y) - CAR_WIDTH / 2.0
        return {
            "cost_front": -c_front,
            "cost_space": -c_space,
            "cost_side": -RHO_SIDE * 0.0,
            "cost_rear": -RHO_REAR * 0.0,
            "cost_boundary": -boundary_cost(d_edge),
        }

    def _check_collision(self) -> bool:
        for car in self.traffic:
            if abs(car.x - self.ego.x) < CAR_LENGTH and abs(car.y - self.ego.y) < CAR_WIDTH:
                return True
        return False

    def _check_off_road(self) -> bool:
        half = CAR_WIDTH / 2.0
        return self.ego.y < half or self.ego.y > ROAD_WIDTH - half

    # ---------------------------------------------------------- snapshots

    def state_dict(self) -> dict:
        ego = self.ego
        return {"x": ego.x, "y": ego.y, "phi": ego.phi, "v_x": ego.v_x, "v_y": ego.v_y,
                "yaw_rate": ego.yaw_rate, "a_x": ego.a_x, "delta": ego.delta}

    def get_state(self) -> dict:
        ego = self.ego
        return {
            "ego": [ego.x, ego.y, ego.phi, ego.v, ego.a_x, ego.delta],
            "traffic": [[c.x, c.lane, c.speed, c.desired_speed] for c in self.traffic],
            "ref_lane": self.ref_lane,
            "target_speed": self.target_speed,
            "goal_x": self.goal_x,
            "steps": self.steps,
            "prev_a_x": self.prev_a_x,
            "prev_delta": self.prev_delta,
        }

    def set_state(self, state: dict) -> None:
        e = state["ego"]
        self.ego = EgoState(x=float(e[0]), y=float(e[1]), phi=float(e[2]),
                            v=float(e[3]), a_x=float(e[4]), delta=float(e[5]))
        self.traffic = [TrafficCar(x=float(t[0]), lane=int(t[1]), speed=float(t[2]),
                                   desired_speed=float(t[3])) for t in state["traffic"]]
        self.ref_lane = int(state["ref_lane"])
        self.target_speed = float(state["target_speed"])
        self.goal_x = float(state["goal_x"])
        self.steps = int(state["steps"])
        self.prev_a_x = float(state["prev_a_x"])
        self.prev_delta = float(state["prev_delta"])

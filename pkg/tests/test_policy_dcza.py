import math
import random

import pytest

from coopclass.context_space import CubeId, cube_contains, level_bound
from coopclass.control import EXPLOIT, EXPLORE, TRAIN, ControlParams
from coopclass.policy_cos import RegionStats
from coopclass.policy_dcza import DczaPolicy, after_slot_update, exploit_mean


def dcza(child_memory=False, n_own=2, n_peers=1, A=1.0, p=2.0, d=1):
    return DczaPolicy(n_own, n_peers, ControlParams(z=0.5, F_max=2), d=d, A=A, p=p, child_memory=child_memory)


class TestSelect:
    def test_fresh(self):
        c = dcza().select((0.4,), 1, lambda k, key: 0)
        assert (c.arm, c.phase) == (0, EXPLORE)
        assert c.region == CubeId(0, (0,))

    def test_peer_creates_missing_cube(self):
        caller, peer = dcza(), dcza()
        after_slot_update(caller, (0.1,))
        after_slot_update(caller, (0.1,))
        key = caller.region((0.1,))
        assert key == CubeId(1, (0,))
        assert not peer.has_cube(key)
        s = caller.stats(key)
        s.n = [100, 100, 0]
        c = caller.select((0.1,), 100, lambda k, cube: peer.peer_count(cube))
        assert peer.has_cube(key)
        assert peer.peer_count(key) == 0
        assert (c.arm, c.phase) == (2, TRAIN)
        assert s.n1[2] == 0

    def test_peer_counts_follow_arrivals_inside_cube(self):
        peer = dcza()
        peer.peer_count(CubeId(2, (1,)))  # [1/4, 1/2)
        for v in (0.3, 0.4, 0.6, 0.1):
            peer.count_labeled((v,))
        assert peer.peer_count(CubeId(2, (1,))) == 2
        assert peer.peer_count(CubeId(0, (0,))) == 4

    def test_saturated_exploits(self):
        pol = dcza(n_peers=0)
        s = pol.stats(CubeId(0, (0,)))
        s.n = [100, 100]
        s.mean = [0.1, 0.7]
        c = pol.select((0.5,), 100, None)
        assert (c.arm, c.phase) == (1, EXPLOIT)


class TestSplit:
    def test_below_threshold(self):
        pol = dcza()
        assert after_slot_update(pol, (0.2,)) == [CubeId(1, (0,)), CubeId(1, (1,))]
        assert after_slot_update(pol, (0.2,)) == []

    def test_zeroed_children(self):
        pol = dcza()
        root = pol.stats(CubeId(0, (0,)))
        root.n = [5, 5, 5]
        root.mean = [0.5, 0.5, 0.5]
        kids = after_slot_update(pol, (0.2,))
        assert len(kids) == 2
        for c in kids:
            s = pol.stats(c)
            assert s.n == [0, 0, 0] and s.mean == [0.0, 0.0, 0.0] and s.n1 == [0, 0, 0]
        assert CubeId(0, (0,)) not in pol.cells

    def test_child_memory_seeds(self):
        pol = dcza(child_memory=True, n_own=1, n_peers=0)
        after_slot_update(pol, (0.1,))
        rng = random.Random(0)
        rewards = [1.0] * 6 + [0.2] * 6
        rng.shuffle(rewards)
        for r in rewards:
            c = pol.select((0.1,), 1, lambda k, key: 0)
            assert c.arm == 0
            pol.record(c, r)
        kids = []
        for _ in range(4):
            kids = after_slot_update(pol, (0.1,)) or kids
        assert kids == [CubeId(2, (0,)), CubeId(2, (1,))]
        s0 = pol.stats(CubeId(2, (0,)))
        assert s0.n[0] == 12
        assert s0.mean[0] == pytest.approx(sum(rewards) / 12)
        assert s0.mean[0] == pytest.approx(0.6)
        assert pol.stats(CubeId(2, (1,))).n[0] == 0

    def test_child_counts_sum_to_parent(self):
        pol = dcza(child_memory=True, d=2)
        rng = random.Random(4)
        seeded = {c: list(s.n) for c, s in pol.cells.items()}
        for t in range(1, 400):
            x = (rng.random(), rng.random())
            c = pol.select(x, t, lambda k, key: 0)
            pol.record(c, rng.random())
            for kid in after_slot_update(pol, x):
                seeded[kid] = list(pol.stats(kid).n)
        for cube, s in pol.cells.items():
            for k in range(pol.n_arms):
                assert sum(s.child_n[j][k] for j in range(4)) == s.n[k] - seeded[cube][k]

    def test_level_bound_through_policy(self):
        pol = dcza(A=1.0, p=4.0)
        rng = random.Random(1)
        for t in range(1, 5000):
            after_slot_update(pol, (rng.random() ** 3,))
            assert pol.tree.max_active_level() <= level_bound(t, 1.0, 4.0)
        assert all(lvl <= level_bound(n, 1.0, 4.0) for n, lvl in pol.split_log)

    def test_tracked_covers_partition(self):
        pol = dcza(p=1.0)
        rng = random.Random(2)
        for _ in range(200):
            after_slot_update(pol, (rng.random(),))
        active = pol.tree.cubes()
        assert set(active) == set(pol.cells)
        assert all(pol.has_cube(c) for c in active)
        assert math.isclose(sum(c.side for c in active), 1.0)
        for _ in range(500):
            v = (rng.random(),)
            assert sum(cube_contains(c, v) for c in active) == 1


class TestExploitMean:
    def stats(self):
        s = RegionStats(1)
        s.n, s.mean = [4], [0.4]
        s.child_n = [[0], [0]]
        s.child_mean = [[0.0], [0.0]]
        return s

    def test_memory_off(self):
        assert exploit_mean(self.stats(), 0, False) == 0.4

    def test_average_of_children(self):
        s = self.stats()
        s.child_n = [[2], [2]]
        s.child_mean = [[0.2], [0.6]]
        assert exploit_mean(s, 0, True) == pytest.approx(0.4)

    def test_only_sampled_children(self):
        s = self.stats()
        s.child_n = [[0], [3]]
        s.child_mean = [[0.0], [0.6]]
        assert exploit_mean(s, 0, True) == pytest.approx(0.6)

    def test_no_samples(self):
        s = RegionStats(1)
        assert exploit_mean(s, 0, False) == -math.inf

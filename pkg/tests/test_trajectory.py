import numpy as np
import pytest

from l1nmpc.errors import InvalidArgument, ParseError
from l1nmpc.rigid_body import Quaternion
from l1nmpc.trajectory import (CircleSpec, CircleTrajectory, HoverTrajectory, load_track,
                               reference_window, slerp)


def spec(**kw):
    base = dict(radius=5.0, v_peak=4.0, ramp_time=5.0, center=(1.0, -2.0, 0.0), altitude=2.0,
                duration=60.0)
    base.update(kw)
    return CircleSpec(**base)


@pytest.fixture
def circle(params):
    return CircleTrajectory(spec(), params)


class TestCircle:
    def test_start(self, circle, params):
        s, ff = circle.sample(0.0)
        assert np.allclose(s.position, [6.0, -2.0, 2.0])
        assert np.allclose(s.velocity, 0)
        assert np.allclose(ff.thrusts, params.hover_thrust)

    def test_after_ramp(self, circle):
        for t in (5.0, 12.3, 40.0):
            s, _ = circle.sample(t)
            assert np.linalg.norm(s.velocity) == pytest.approx(4.0, rel=1e-12)
            assert np.linalg.norm(s.position[:2] - [1.0, -2.0]) == pytest.approx(5.0, rel=1e-12)
            assert s.body_rates[2] == pytest.approx(4.0 / 5.0)

    def test_quarter_revolution(self, params):
        tr = CircleTrajectory(spec(ramp_time=0.0), params)
        s, _ = tr.sample(np.pi * 5.0 / (2 * 4.0))
        assert np.allclose(s.position, [1.0, 3.0, 2.0], atol=1e-12)

    def test_velocity_is_derivative(self, circle):
        h = 1e-6
        for t in (1.0, 4.5, 7.0, 30.0):
            fd = (circle.sample(t + h)[0].position - circle.sample(t - h)[0].position) / (2 * h)
            assert np.allclose(circle.sample(t)[0].velocity, fd, atol=1e-6)

    def test_heading_along_velocity(self, circle):
        for t in np.linspace(0.5, 59, 15):
            s, _ = circle.sample(t)
            assert abs(s.attitude.norm() - 1) < 1e-12 and s.attitude.w >= 0
            fwd = s.attitude.rotation_matrix()[:, 0]
            assert np.allclose(fwd, s.velocity / np.linalg.norm(s.velocity), atol=1e-12)

    def test_out_of_range(self, circle):
        with pytest.raises(InvalidArgument):
            circle.sample(-0.1)
        with pytest.raises(InvalidArgument):
            circle.sample(60.5)

    def test_invalid_spec(self):
        with pytest.raises(InvalidArgument):
            spec(radius=0.0)
        with pytest.raises(InvalidArgument):
            spec(center=(0, 0))


class TestWindow:
    def test_nodes_match_samples(self, circle):
        w = reference_window(circle, 3.0, 20, 0.05)
        assert w.states.shape == (21, 13) and w.inputs.shape == (20, 4)
        for k in range(21):
            assert np.array_equal(w.states[k], circle.sample(3.0 + 0.05 * k)[0].as_array())

    def test_continues_past_end(self, circle):
        w = reference_window(circle, 59.9, 4, 0.05)
        assert np.linalg.norm(w.states[-1, 7:10]) == pytest.approx(4.0)
        assert not np.allclose(w.states[-1, :3], w.states[-2, :3])

    def test_hover(self, params):
        h = HoverTrajectory((1, 2, 3), 5.0, params)
        w = reference_window(h, 1.0, 5, 0.1)
        assert np.allclose(w.states[:, 0:3], [1, 2, 3])
        assert np.allclose(w.states[:, 3:7], [1, 0, 0, 0])
        assert np.allclose(w.inputs, params.hover_thrust)


def write(tmp_path, text):
    p = tmp_path / "track.csv"
    p.write_text(text)
    return p


class TestTrack:
    def test_exact_row_and_midpoint(self, tmp_path, params):
        p = write(tmp_path, "t,px,py,pz,T0,T1,T2,T3\n0,0,0,1,1,1,1,1\n1,2,0,1,2,2,2,2\n2,2,4,1,3,3,3,3\n")
        tr = load_track(p, params)
        s, u = tr.sample(1.0)
        assert np.array_equal(s.position, [2, 0, 1]) and np.array_equal(u.thrusts, [2] * 4)
        s, u = tr.sample(1.5)
        assert np.allclose(s.position, [2, 2, 1])
        assert np.array_equal(u.thrusts, [2] * 4)  # zero-order hold
        assert tr.duration == 2.0

    def test_clamps(self, tmp_path, params):
        tr = load_track(write(tmp_path, "t,px,py,pz\n0,0,0,0\n1,1,1,1\n"), params)
        assert np.array_equal(tr.sample(-3.0)[0].position, [0, 0, 0])
        assert np.array_equal(tr.sample(7.0)[0].position, [1, 1, 1])
        assert np.allclose(tr.sample(0.5)[0].velocity, [1, 1, 1])

    def test_attitude_slerp(self, tmp_path, params):
        q = Quaternion.from_yaw(np.pi / 2).as_array()
        text = "t,px,py,pz,qw,qx,qy,qz\n0,0,0,0,1,0,0,0\n1,0,0,0,%r,%r,%r,%r\n" % tuple(q.tolist())
        tr = load_track(write(tmp_path, text), params)
        assert tr.sample(0.5)[0].attitude.yaw() == pytest.approx(np.pi / 4, abs=1e-12)

    def test_slerp_endpoints(self):
        a, b = Quaternion(), Quaternion.from_yaw(1.0)
        assert np.allclose(slerp(a, b, 0.0).as_array(), a.as_array())
        assert np.allclose(slerp(a, b, 1.0).as_array(), b.as_array())

    @pytest.mark.parametrize("text,line", [
        ("t,px,py\n0,0,0\n", 1),
        ("t,px,py,pz\n0,0,0,0\n1,0,x,0\n", 3),
        ("t,px,py,pz\n0,0,0,0\n1,0,0\n", 3),
        ("t,px,py,pz\n0,0,0,0\n1,0,0,0\n1,0,0,0\n", 4),
        ("t,px,py,pz\n0.5,0,0,0\n1,0,0,0\n", 2),
        ("t,px,py,pz\n0,0,0,0\n1,0,nan,0\n", 3),
        ("t,px,py,pz,qw,qx,qy,qz\n0,0,0,0,1,0,0,0\n1,0,0,0,0,0,0,0\n", 3),
    ])
    def test_parse_errors_carry_line(self, tmp_path, params, text, line):
        with pytest.raises(ParseError) as info:
            load_track(write(tmp_path, text), params)
        assert info.value.line == line
        assert f"line {line}" in str(info.value)

    def test_too_short(self, tmp_path, params):
        with pytest.raises(ParseError):
            load_track(write(tmp_path, "t,px,py,pz\n0,0,0,0\n"), params)

import numpy as np
import pytest

import filamentlab as fl
from filamentlab import geometry as geo

R_UNIT = 1.0 / (2.0 * np.pi)  # radius of the unit-length circle


# -- resampling ----------------------------------------------------------------


def test_resample_preserves_polyline_length():
    theta = 2.0 * np.pi * np.arange(256) / 256
    poly = np.stack([np.cos(theta), np.sin(theta), np.zeros(256)], axis=1)
    perimeter = 256 * 2.0 * np.sin(np.pi / 256)
    out = geo.resample_arclength(poly, n=256)
    assert abs(out.length - perimeter) < 1e-12


def test_resample_fixed_point():
    c = fl.circle(n=256)
    out = geo.resample_arclength(c.samples, n=256)
    move = np.max(np.linalg.norm(out.samples - c.samples, axis=1))
    assert move < 1e-10 * c.length


def test_resample_bunched_ellipse_matches_brute_force():
    rng = np.random.default_rng(42)
    m = 32768
    u = np.sort(rng.uniform(0.0, 2.0 * np.pi, m))
    pts = np.stack([0.3 * np.cos(u), 0.2 * np.sin(u), np.zeros(m)], axis=1)
    out = geo.resample_arclength(pts, n=4096)

    chords = np.linalg.norm(np.roll(out.samples, -1, axis=0) - out.samples, axis=1)
    assert (chords.max() - chords.min()) / chords.mean() < 1e-6

    # oracle: cumulative-arclength inversion on the 100x refined polyline
    seg = np.roll(pts, -1, axis=0) - pts
    fr = np.arange(100) / 100.0
    dense = (pts[:, None, :] + fr[None, :, None] * seg[:, None, :]).reshape(-1, 3)
    ch = np.linalg.norm(np.roll(dense, -1, axis=0) - dense, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(ch)])
    targets = np.arange(4096) * cum[-1] / 4096
    idx = np.clip(np.searchsorted(cum, targets, "right") - 1, 0, len(dense) - 1)
    frac = (targets - cum[idx]) / ch[idx]
    oracle = dense[idx] + frac[:, None] * (np.roll(dense, -1, axis=0)[idx] - dense[idx])
    assert np.max(np.linalg.norm(out.samples - oracle, axis=1)) < 1e-10


def test_resample_rejects_degenerate_input():
    with pytest.raises(ValueError):
        geo.resample_arclength(np.zeros((12, 3)))
    with pytest.raises(ValueError):
        geo.resample_arclength(np.ones((4, 3)))


def test_resample_idempotent():
    e = fl.ellipse(n=2048)
    once = geo.resample_arclength(e.samples, n=2048)
    twice = geo.resample_arclength(once.samples, n=2048)
    assert np.max(np.linalg.norm(twice.samples - once.samples, axis=1)) < 1e-10


# -- derivatives ---------------------------------------------------------------


def test_circle_curvature():
    c = fl.circle(n=512)
    assert c.speed_error < 1e-8
    kappa = np.linalg.norm(c.d2, axis=1)
    assert np.max(np.abs(kappa - 2.0 * np.pi)) < 1e-8


def test_circle_tangent_orthogonality():
    # spectral differentiation amplifies sample round-off by k^2, so the
    # achievable tolerance is resolution-dependent; 256 samples keep it
    # below 1e-10 for the unit circle
    c = fl.circle(n=256)
    dots = np.abs(np.sum(c.d1 * c.d2, axis=1))
    assert np.max(dots) < 1e-10


def test_trefoil_spectral_matches_fd6():
    t = fl.trefoil(n=1024)
    h = t.h
    p = t.samples
    # 6th-order central differences
    fd = (
        45.0 * (np.roll(p, -1, axis=0) - np.roll(p, 1, axis=0))
        - 9.0 * (np.roll(p, -2, axis=0) - np.roll(p, 2, axis=0))
        + (np.roll(p, -3, axis=0) - np.roll(p, 3, axis=0))
    ) / (60.0 * h)
    assert np.max(np.linalg.norm(t.d1 - fd, axis=1)) < 1e-7


# -- security radius and weak norm ----------------------------------------------


def test_circle_security_radius_is_radius():
    c = fl.circle(n=512)
    r = c.profile().r
    assert np.max(np.abs(r - R_UNIT)) / R_UNIT < 0.01


def test_security_radius_below_inverse_curvature():
    for curve in (fl.ellipse(n=512), fl.trefoil(n=512)):
        prof = curve.profile()
        kappa = np.linalg.norm(curve.d2, axis=1)
        assert np.all(prof.r <= 1.0 / kappa + 2.0 * curve.h)


def test_polygon_corner_radius_zero():
    sq = fl.regular_polygon(k=4, n=128)
    prof = sq.profile()
    assert sq.corner_indices.size == 4
    assert np.all(prof.r[sq.corner_indices] == 0.0)
    # mid-edge radius equals the distance to the nearest corner
    assert abs(prof.r[16] - 0.125) < 1e-9


def test_weak_l1inf_constant():
    assert geo.weak_l1inf(np.full(128, 3.7), 1.0 / 128) == pytest.approx(3.7)


def test_weak_l1inf_one_over_s():
    n = 4096
    s = np.arange(1, n + 1) / n
    val = geo.weak_l1inf(1.0 / s, 1.0 / n)
    # sup_sigma sigma*min(1, 1/sigma) = 1, up to the grid resolution
    assert abs(val - 1.0) < 2.0 / n + 1e-12


def test_weak_l1inf_circle_is_2pi():
    radius = 0.37
    n = 512
    kappa_star = np.full(n, 1.0 / radius)
    val = geo.weak_l1inf(kappa_star, 2.0 * np.pi * radius / n)
    assert val == pytest.approx(2.0 * np.pi, rel=1e-12)


def test_weak_norm_scaling_invariance():
    base = fl.trefoil(n=256)
    ref = base.profile().weak_norm
    for alpha in (0.5, 2.0, 10.0):
        scaled = geo.scale_curve(base, alpha)
        assert abs(scaled.profile().weak_norm - ref) / ref < 0.01


def test_weak_norm_at_least_two_for_unit_length():
    for curve in (fl.circle(n=256), fl.ellipse(n=256), fl.regular_polygon(k=4, n=256)):
        assert curve.profile().weak_norm >= 2.0 - 1e-9


# -- ball hit length -------------------------------------------------------------


def test_ball_hit_far_point():
    c = fl.circle(n=512)
    assert geo.ball_hit_length(c, np.array([5.0, 0.0, 0.0]), 0.3) == 0.0


def test_ball_hit_center_catches_everything():
    c = fl.circle(n=512)
    assert geo.ball_hit_length(c, np.zeros(3), R_UNIT + 1e-6) == pytest.approx(1.0)


def test_linear_bound_constant_eight():
    rng = np.random.default_rng(7)
    for curve in (fl.circle(n=512), fl.ellipse(n=512), fl.trefoil(n=512)):
        wk = curve.profile().weak_norm
        lo = curve.samples.min(axis=0) - 0.3
        hi = curve.samples.max(axis=0) + 0.3
        xs = rng.uniform(lo, hi, size=(1000, 3))
        rs = np.exp(rng.uniform(np.log(1e-3), np.log(1.0), 1000))
        for x, r in zip(xs, rs):
            assert geo.ball_hit_length(curve, x, r) <= 8.0 * r * wk + 1e-12


# -- tube projection --------------------------------------------------------------


def test_tube_project_on_curve():
    e = fl.ellipse(n=512)
    tp = geo.tube_project(e, e.samples[37])
    assert tp.dist < 1e-12
    assert abs(tp.s - e.s[37]) < 1e-10
    assert tp.inside


def test_tube_project_orthogonal_offset():
    e = fl.ellipse(n=512)
    prof = e.profile()
    i = 100
    tan = e.d1[i]
    nrm = np.array([-tan[1], tan[0], 0.0])
    nrm /= np.linalg.norm(nrm)
    x = e.samples[i] + (prof.r[i] / 8.0) * nrm
    tp = geo.tube_project(e, x)
    assert tp.inside
    assert tp.dist == pytest.approx(prof.r[i] / 8.0, rel=1e-10)
    assert abs(tp.s - e.s[i]) < 1e-8


def test_tube_project_matches_dense_grid():
    e = fl.ellipse(n=512)
    prof = e.profile()
    rng = np.random.default_rng(11)
    t_dense = np.arange(1_000_000) * e.length / 1_000_000
    pts_dense = e.point(t_dense)
    for _ in range(50):
        i = rng.integers(0, 512)
        tan = e.d1[i]
        nrm = np.array([-tan[1], tan[0], 0.0])
        nrm /= np.linalg.norm(nrm)
        rho = rng.uniform(0.01, 0.24) * prof.r[i]
        x = e.samples[i] + rho * nrm
        tp = geo.tube_project(e, x)
        j = np.argmin(np.linalg.norm(pts_dense - x, axis=1))
        diff = abs(tp.s - t_dense[j])
        diff = min(diff, e.length - diff)
        assert diff < 1e-6


def test_tube_project_center_tie_lowest_index():
    c = fl.circle(n=512)
    tp = geo.tube_project(c, np.zeros(3))
    assert not tp.inside
    assert tp.s == pytest.approx(0.0, abs=1e-12)
    assert tp.dist == pytest.approx(R_UNIT, rel=1e-12)


# -- grad_zeta ---------------------------------------------------------------------


def test_grad_zeta_on_curve_is_tangent():
    e = fl.ellipse(n=512)
    g = geo.grad_zeta(e, e.samples[200])
    assert np.linalg.norm(g - e.d1[200]) < 1e-8


def test_grad_zeta_outside_tube_rejected():
    c = fl.circle(n=512)
    with pytest.raises(ValueError):
        geo.grad_zeta(c, np.array([10.0, 0.0, 0.0]))


def test_grad_zeta_matches_fd_and_loclip():
    e = fl.ellipse(n=512)
    prof = e.profile()
    rng = np.random.default_rng(3)
    step = 1e-5 * e.length
    for _ in range(100):
        i = int(rng.integers(0, 512))
        tan = e.d1[i]
        nrm = np.array([-tan[1], tan[0], 0.0])
        nrm /= np.linalg.norm(nrm)
        rho = float(rng.uniform(0.02, 0.2)) * prof.r[i]
        x = e.samples[i] + rho * nrm
        g = geo.grad_zeta(e, x)
        fd = np.zeros(3)
        for axis in range(3):
            dx = np.zeros(3)
            dx[axis] = step
            sp = geo.tube_project(e, x + dx).s
            sm = geo.tube_project(e, x - dx).s
            d = sp - sm
            if d > e.length / 2:
                d -= e.length
            if d < -e.length / 2:
                d += e.length
            fd[axis] = d / (2.0 * step)
        assert np.linalg.norm(fd - g) / np.linalg.norm(g) < 1e-5
        tp = geo.tube_project(e, x)
        r_here = prof.r[int(round(tp.s / e.h)) % e.n]
        assert abs(1.0 / np.linalg.norm(g) - 1.0) <= tp.dist / r_here + 1e-10


# -- tube volume --------------------------------------------------------------------


def test_tube_volume_bound():
    t = fl.trefoil(n=256)
    rng = np.random.default_rng(19)
    lo = t.samples.min(axis=0) - 0.3
    hi = t.samples.max(axis=0) + 0.3
    box_vol = np.prod(hi - lo)
    xs = rng.uniform(lo, hi, size=(200_000, 3))
    dmin = np.min(
        np.linalg.norm(xs[:, None, :] - t.samples[None, :, :], axis=2), axis=1
    )
    for r in (2.0**-2, 2.0**-3, 2.0**-4, 2.0**-5, 2.0**-6):
        vol = box_vol * np.mean(dmin < r)
        assert vol <= 8.0 * (r**2 + r**3)


# -- file round trips ----------------------------------------------------------------


def test_csv_round_trip(tmp_path):
    e = fl.ellipse(n=128)
    path = tmp_path / "curve.csv"
    geo.curve_to_csv(e, path)
    back = geo.curve_from_csv(path)
    assert back.length == pytest.approx(e.length, rel=1e-14)
    assert np.max(np.abs(back.samples - e.samples)) < 1e-14


def test_json_round_trip(tmp_path):
    sq = fl.regular_polygon(k=4, n=64)
    path = tmp_path / "curve.json"
    geo.curve_to_json(sq, path)
    back = geo.curve_from_json(path)
    assert back.piecewise_linear
    assert np.array_equal(back.corner_indices, sq.corner_indices)
    assert np.max(np.abs(back.samples - sq.samples)) < 1e-15

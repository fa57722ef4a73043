import numpy as np
import pytest

import filamentlab as fl
from filamentlab.biot_savart import (
    FilamentField,
    Mollifier,
    SuperposedField,
    eta_g_profile,
    eval_vector_potential,
    eval_velocity,
)
from filamentlab.geometry import tube_project_batch

R_UNIT = 1.0 / (2.0 * np.pi)


@pytest.fixture(scope="module")
def circle512():
    return fl.circle(n=512)


@pytest.fixture(scope="module")
def trefoil512():
    return fl.trefoil(n=512)


# -- mollifier profiles -----------------------------------------------------------


def test_kernel_branches():
    m = Mollifier(0.1)
    z = np.array([[0.2, 0.0, 0.0], [0.05, 0.0, 0.0]])
    k = m.kernel(z)
    assert np.allclose(k[0], [-0.2 / (4 * np.pi * 0.2**3), 0, 0])
    assert np.allclose(k[1], [-0.05 / (4 * np.pi * 0.1**3), 0, 0])


def test_eta_g_newtonian_tail():
    m = Mollifier(0.02)
    r = 3 * m.epsilon
    assert eta_g_profile(m, r) == pytest.approx(1.0 / (4 * np.pi * r), rel=1e-12)


def test_eta_g_at_zero_bounded():
    m = Mollifier(0.015)
    val = eta_g_profile(m, 0.0)
    c = val * m.epsilon
    assert c == pytest.approx(3.0 / (10.0 * np.pi), rel=1e-12)
    assert c < 2.0


def test_eta_g_monotone():
    m = Mollifier(0.01)
    r = np.linspace(0.0, 0.05, 2000)
    vals = m.eta_g(r)
    assert np.all(np.diff(vals) <= 1e-12)


def test_eta_g_mass_recovered():
    # -Laplacian of eta*G is eta, whose total mass is 1
    eps = 0.03
    m = Mollifier(eps)
    dr = 1e-3 * eps
    r = np.arange(dr, 2 * eps + 6 * dr, dr)
    f = m.eta_g(r)
    g = r**2 * np.gradient(f, dr)  # r^2 f'
    eta = -np.gradient(g, dr) / r**2
    mask = r <= 2 * eps
    mass = 4 * np.pi * np.trapezoid(r[mask] ** 2 * eta[mask], r[mask])
    assert mass == pytest.approx(1.0, abs=1e-4)


# -- velocity ---------------------------------------------------------------------


def test_circle_center_velocity(circle512):
    # dense trapezoid of the exact (nonsingular at the center) integrand
    m = 1_000_000
    t = np.arange(m) * circle512.length / m
    g = circle512.point(t)
    tau = circle512.tangent(t)
    e = -g
    r3 = np.sum(e * e, axis=1) ** 1.5
    oracle = (circle512.length / m) * np.sum(
        np.cross(-e / (4 * np.pi * r3[:, None]), tau), axis=0
    )
    f = FilamentField(circle512, 2.0**-8)
    v = eval_velocity(f, np.zeros(3))
    assert np.linalg.norm(v - oracle) < 1e-8
    assert np.linalg.norm(v) == pytest.approx(1.0 / (2.0 * R_UNIT), rel=1e-10)
    assert v[2] > 0  # counterclockwise circle induces flow along +z


def test_pointwise_min_bound(trefoil512):
    eps = 2.0**-7
    f = FilamentField(trefoil512, eps)
    wk = trefoil512.profile().weak_norm
    rng = np.random.default_rng(23)
    pts = rng.uniform(-1.0, 1.0, size=(200, 3))
    _, dist, _ = tube_project_batch(trefoil512, pts)
    v = np.linalg.norm(f.velocity(pts), axis=1)
    bound = np.minimum(
        1.0 / dist**2, np.minimum(wk / dist, wk / eps)
    )
    c = np.max(v / bound)
    assert c < 0.5  # fitted constant, comfortably O(1)


def test_in_tube_leading_term(circle512):
    prof = circle512.profile()
    eps = 2.0**-9
    f = FilamentField(circle512, eps)
    i = 37
    tau = circle512.d1[i]
    nrm = np.array([-tau[1], tau[0], 0.0])
    nrm /= np.linalg.norm(nrm)
    ratios = []
    for d in (2.0**-8, 2.0**-7, 2.0**-6, 2.0**-5):
        x = circle512.samples[i] + d * nrm
        v = f.velocity(x[None, :])[0]
        lead = np.cross(circle512.samples[i] - x, tau) / (2.0 * np.pi * d * d)
        resid = np.linalg.norm(v - lead)
        bound = (abs(np.log(d)) + prof.weak_norm) / prof.r[i]
        ratios.append(resid / bound)
    assert max(ratios) < 0.1  # fitted constant, stable across dyadic distances
    assert max(ratios) / min(ratios) < 2.0


def test_azimuthal_structure(trefoil512):
    # inside the tube the field is azimuthal to leading order: the component
    # along the local tangent is controlled by (|log d| + k)/r
    eps = 2.0**-9
    f = FilamentField(trefoil512, eps)
    prof = trefoil512.profile()
    rng = np.random.default_rng(4)
    for _ in range(20):
        i = int(rng.integers(0, trefoil512.n))
        tau = trefoil512.d1[i]
        a = rng.normal(size=3)
        nrm = np.cross(a, tau)
        nrm /= np.linalg.norm(nrm)
        d = 4.0 * eps
        if d >= prof.r[i] / 4.0:
            continue
        x = trefoil512.samples[i] + d * nrm
        v = f.velocity(x[None, :])[0]
        along = abs(np.dot(v, tau))
        bound = (abs(np.log(d)) + prof.weak_norm) / prof.r[i]
        assert along <= 1.5 * bound


def test_divergence_free(trefoil512):
    eps = 2.0**-6
    f = FilamentField(trefoil512, eps)
    rng = np.random.default_rng(8)
    pts = rng.uniform(-1.2, 1.2, size=(150, 3))
    _, dist, _ = tube_project_batch(trefoil512, pts)
    pts = pts[dist > 0.1][:100]
    step = 1e-4
    div = np.zeros(len(pts))
    for axis in range(3):
        dx = np.zeros(3)
        dx[axis] = step
        div += (f.velocity(pts + dx)[:, axis] - f.velocity(pts - dx)[:, axis]) / (
            2 * step
        )
    vmag = np.linalg.norm(f.velocity(pts), axis=1)
    assert np.max(np.abs(div) / vmag) < 1e-5


def test_far_field_decay(circle512):
    f = FilamentField(circle512, 2.0**-7)
    for d in (1.0, 2.0, 5.0, 10.0):
        v = eval_velocity(f, np.array([d, 0.1, 0.2]))
        assert np.linalg.norm(v) * d * d < 1.0


def test_mollification_consistency(trefoil512):
    # outside the support of the mollifier the field does not see epsilon
    rng = np.random.default_rng(5)
    idx = rng.integers(0, trefoil512.n, 20)
    tau = trefoil512.d1[idx]
    a = rng.normal(size=(20, 3))
    nrm = np.cross(a, tau)
    nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
    pts = trefoil512.samples[idx] + 0.05 * nrm
    _, dist, _ = tube_project_batch(trefoil512, pts)
    pts = pts[dist > 2.0**-6 + 0.01]
    v1 = FilamentField(trefoil512, 2.0**-6).velocity(pts)
    v2 = FilamentField(trefoil512, 2.0**-7).velocity(pts)
    rel = np.linalg.norm(v1 - v2, axis=1) / np.linalg.norm(v1, axis=1)
    assert np.max(rel) < 1e-8


def test_superposition_linearity(circle512):
    f = FilamentField(circle512, 2.0**-6)
    double = SuperposedField([f, f])
    x = np.array([[0.3, 0.1, 0.05]])
    assert np.allclose(double.velocity(x), 2.0 * f.velocity(x))


def test_epsilon_validation(circle512):
    with pytest.raises(ValueError):
        FilamentField(circle512, 0.6)
    with pytest.raises(ValueError):
        FilamentField(circle512, 0.0)


# -- vector potential ---------------------------------------------------------------


def test_potential_far_decay(circle512):
    f = FilamentField(circle512, 2.0**-7)
    for d in (10.0, 20.0, 40.0):
        phi = eval_vector_potential(f, np.array([d, 0.0, 0.1]))
        assert np.linalg.norm(phi) * d * d < 1.0


def test_curl_of_potential_is_velocity(trefoil512):
    f = FilamentField(trefoil512, 2.0**-7)
    rng = np.random.default_rng(12)
    pts = rng.uniform(-1.2, 1.2, size=(200, 3))
    _, dist, _ = tube_project_batch(trefoil512, pts)
    pts = pts[dist > 0.15][:100]
    step = 1e-4
    curl = np.zeros((len(pts), 3))
    for axis in range(3):
        dx = np.zeros(3)
        dx[axis] = step
        jac = (f.vector_potential(pts + dx) - f.vector_potential(pts - dx)) / (2 * step)
        if axis == 0:
            curl[:, 1] -= jac[:, 2]
            curl[:, 2] += jac[:, 1]
        elif axis == 1:
            curl[:, 0] += jac[:, 2]
            curl[:, 2] -= jac[:, 0]
        else:
            curl[:, 0] -= jac[:, 1]
            curl[:, 1] += jac[:, 0]
    v = f.velocity(pts)
    rel = np.linalg.norm(curl - v, axis=1) / np.linalg.norm(v, axis=1)
    assert np.max(rel) < 1e-5


def test_straight_segment_potential_oracle():
    # square filament, evaluation at an edge midpoint: sum of exact straight
    # filament potentials (mollified on the near segment)
    n = 2048
    sq = fl.regular_polygon(k=4, n=n)
    eps = 0.01
    f = FilamentField(sq, eps)
    m = Mollifier(eps)
    x = sq.samples[n // 8]

    def segment_potential(a, b):
        seg_len = np.linalg.norm(b - a)
        tau = (b - a) / seg_len
        t = np.linspace(0.0, seg_len, 400001)
        t0 = np.dot(x - a, tau)
        rho2 = np.sum((x - a - t0 * tau) ** 2)
        r = np.sqrt(rho2 + (t - t0) ** 2)
        return np.trapezoid(m.ball_potential(r), t) * tau

    verts = sq.samples[sq.corner_indices]
    oracle = sum(segment_potential(verts[j], verts[(j + 1) % 4]) for j in range(4))
    ours = eval_vector_potential(f, x)
    assert np.linalg.norm(ours - oracle) / np.linalg.norm(oracle) < 1e-6

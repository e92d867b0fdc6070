import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phidca.core import DomainError, DualPair, DualTriple, InvalidArgumentError
from phidca.couplings import (
    Anisotropic,
    Bregman,
    Hoelder,
    Quadratic,
    coupling_kinds,
    make_coupling,
    phi_eval,
    phi_grad_x,
)
from phidca.references import make_reference, reference_names

coords = st.floats(-1.5, 1.5, allow_nan=False)


def _dual(c, rng, x):
    n = len(x)
    if c.y_shape == "pair":
        return DualPair(x + rng.uniform(-0.5, 0.5, n), rng.uniform(-1, 1, n))
    if c.y_shape == "triple":
        A = rng.uniform(-1, 1, (n, n))
        return DualTriple(x + rng.uniform(-0.5, 0.5, n), rng.uniform(-1, 1, n), A + A.T)
    return x + rng.uniform(-0.3, 0.3, n)


CATALOG = [
    make_coupling("Bilinear"),
    make_coupling("Quadratic", L=2.0),
    make_coupling("Bregman", h="entropy", L=1.5),
    make_coupling("Bregman", h="cosh", L=1.0),
    make_coupling("ReversedBregman", h="cosh"),
    make_coupling("Anisotropic", h="softplus", L=0.7),
    make_coupling("Anisotropic", h={"name": "power", "q": 1.5, "c": 0.75}, L=0.5),
    make_coupling("L0L1", L0=1.0, L1=1.0),
    make_coupling("Hoelder", H=2.0, nu=0.5),
    make_coupling("Hoelder", H=1.0, nu=1.0),
    make_coupling("Tensor", p=1, L_p=3.0),
    make_coupling("Tensor", p=2, L_p=6.0),
]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(range(len(CATALOG))), st.integers(1, 2))
def test_grad_matches_central_differences(seed, idx, n):
    c = CATALOG[idx]
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.2, 1.5, n) if isinstance(c, Bregman) and c.h.name == "entropy" else rng.uniform(-1, 1, n)
    y = _dual(c, rng, x)
    if isinstance(c, Bregman) and c.h.name == "entropy":
        y = np.abs(y) + 0.1
    g = phi_grad_x(c, x, y)
    eps = 1e-6
    fd = np.array([(phi_eval(c, x + eps * e, y) - phi_eval(c, x - eps * e, y)) / (2 * eps) for e in np.eye(n)])
    assert np.allclose(g, fd, rtol=1e-6, atol=1e-6 * (1 + np.max(np.abs(g))))


@settings(max_examples=100, deadline=None)
@given(st.lists(coords, min_size=2, max_size=2), st.lists(coords, min_size=2, max_size=2),
       st.floats(0.1, 10.0))
def test_quadratic_couplings_agree(x, y, L):
    q = Quadratic(L)
    a = Anisotropic(make_reference("quadratic"), L)
    b = Bregman(make_reference("quadratic"), L)
    vq = phi_eval(q, x, y)
    for c in (a, b):
        assert abs(phi_eval(c, x, y) - vq) <= 1e-12 * (1 + abs(vq))


def test_bilinear_and_quadratic_values():
    assert phi_eval(make_coupling("Bilinear"), [1.0, 2.0], [3.0, -1.0]) == 1.0
    assert phi_eval(Quadratic(2.0), [1.0], [0.0]) == -1.0


def test_hoelder_value():
    c = Hoelder(1.0, 1.0)
    y = DualPair(np.array([1.0]), np.array([0.0]))
    assert phi_eval(c, [3.0], y) == pytest.approx(-2.0)


def test_tensor_value_has_half_on_hessian_term():
    c = make_coupling("Tensor", p=2, L_p=6.0)
    y = DualTriple(np.array([0.0]), np.array([1.0]), np.array([[2.0]]))
    # <1, s> + ½·2·s² − (6/6)|s|³ at s = 1
    assert phi_eval(c, [1.0], y) == pytest.approx(1.0 + 1.0 - 1.0)


def test_bregman_outside_domain():
    c = make_coupling("Bregman", h="entropy", L=1.0)
    assert phi_eval(c, [-1.0], [1.0]) == -np.inf
    with pytest.raises(DomainError):
        phi_eval(c, [1.0], [-1.0])


def test_l0l1_finite_inside_ball():
    c = make_coupling("L0L1", L0=1.0, L1=2.0, delta=0.5)
    assert np.isfinite(phi_eval(c, [0.2], [0.0]))
    assert phi_eval(c, [0.3], [0.0]) == -np.inf


def test_dual_shape_checked():
    with pytest.raises(InvalidArgumentError):
        phi_eval(Quadratic(1.0), [1.0], DualPair(np.array([1.0]), np.array([1.0])))
    with pytest.raises(InvalidArgumentError):
        phi_eval(Hoelder(1.0, 1.0), [1.0], [1.0])


@pytest.mark.parametrize("kind,params", [
    ("Quadratic", {"L": 0.0}),
    ("Hoelder", {"H": 1.0, "nu": 1.5}),
    ("L0L1", {"L0": 1.0, "L1": 1.0, "delta": 1.0}),
    ("Tensor", {"p": 3, "L_p": 1.0}),
    ("Nope", {}),
    ("Quadratic", {"M": 1.0}),
])
def test_invalid_parameters(kind, params):
    with pytest.raises(InvalidArgumentError):
        make_coupling(kind, **params)


def test_catalog_names():
    assert coupling_kinds() == sorted(["Anisotropic", "Bilinear", "Bregman", "Hoelder", "L0L1",
                                       "Quadratic", "ReversedBregman", "Tensor"])
    assert "entropy" in reference_names() and "softplus" in reference_names()


@pytest.mark.parametrize("name", ["quadratic", "entropy", "cosh", "softplus", "logcosh", "power", "l0l1"])
def test_reference_conjugate_inverts_gradient(name):
    h = make_reference(name)
    u = np.array([0.3]) if name != "l0l1" else np.array([0.3, -0.2])
    assert np.allclose(h.conj_grad(h.grad(u)), u, atol=1e-12)

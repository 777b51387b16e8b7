import math

import pytest
import torch

from phaserec.model.gru import GRUCell, xavier_normal_std


def scalar_cell(params):
    """1-d cell with hand-settable scalars, run in float64."""
    cell = GRUCell(1, 1).double()
    with torch.no_grad():
        for gate_idx, gate in enumerate(("z", "r", "n")):
            cell.weight_ih[gate_idx, 0] = params[f"W_{gate}"]
            cell.weight_hh[gate_idx, 0] = params[f"U_{gate}"]
            cell.bias_ih[gate_idx] = params[f"bi_{gate}"]
            cell.bias_hh[gate_idx] = params[f"bh_{gate}"]
    return cell


def hand_step(p, x, h):
    """Scalar arithmetic oracle for the pinned reset-inside convention."""
    sig = lambda v: 1.0 / (1.0 + math.exp(-v))
    z = sig(p["W_z"] * x + p["bi_z"] + p["U_z"] * h + p["bh_z"])
    r = sig(p["W_r"] * x + p["bi_r"] + p["U_r"] * h + p["bh_r"])
    n = math.tanh(p["W_n"] * x + p["bi_n"] + p["U_n"] * (r * h) + p["bh_n"])
    return (1.0 - z) * h + z * n


CASE_A = dict(W_z=0.3, U_z=-0.2, bi_z=0.1, bh_z=0.05,
              W_r=-0.4, U_r=0.25, bi_r=-0.1, bh_r=0.2,
              W_n=0.5, U_n=-0.3, bi_n=0.15, bh_n=-0.05)
CASE_B = dict(W_z=-1.1, U_z=0.7, bi_z=0.0, bh_z=-0.3,
              W_r=0.9, U_r=-0.6, bi_r=0.25, bh_r=0.1,
              W_n=-0.8, U_n=0.45, bi_n=-0.2, bh_n=0.35)
CASE_ZERO = {k: 0.0 for k in CASE_A}


@pytest.mark.parametrize("params,x,h", [
    (CASE_ZERO, 0.0, 0.0),
    (CASE_A, 0.7, -0.4),
    (CASE_B, -1.3, 0.55),
])
def test_gru_step_matches_scalar_hand_computation(params, x, h):
    cell = scalar_cell(params)
    with torch.no_grad():
        out = cell(torch.tensor([[x]], dtype=torch.float64),
                   torch.tensor([[h]], dtype=torch.float64))
    assert abs(float(out) - hand_step(params, x, h)) < 1e-12


def test_zero_weights_give_half_gates_and_zero_state():
    cell = scalar_cell(CASE_ZERO)
    x = torch.zeros(1, 1, dtype=torch.float64)
    h = torch.zeros(1, 1, dtype=torch.float64)
    # z = r = sigmoid(0) = 0.5, candidate = tanh(0) = 0, h' = 0.5*0 + 0.5*0 = 0
    with torch.no_grad():
        W, U, bi, bh = cell.gate_tensors("z")
        z = torch.sigmoid(x @ W.t() + bi + h @ U.t() + bh)
        assert float(z) == pytest.approx(0.5)
        assert float(cell(x, h)) == 0.0


def test_saturated_update_gate_returns_candidate():
    params = dict(CASE_A, bi_z=100.0)   # z -> 1, so h' -> candidate
    cell = scalar_cell(params)
    x, h = 0.3, -0.8
    with torch.no_grad():
        out = float(cell(torch.tensor([[x]], dtype=torch.float64),
                         torch.tensor([[h]], dtype=torch.float64)))
    sig = lambda v: 1.0 / (1.0 + math.exp(-v))
    r = sig(params["W_r"] * x + params["bi_r"] + params["U_r"] * h + params["bh_r"])
    candidate = math.tanh(params["W_n"] * x + params["bi_n"]
                          + params["U_n"] * (r * h) + params["bh_n"])
    assert out == pytest.approx(candidate, abs=1e-9)


def test_reset_gate_applies_inside_recurrent_product():
    # The two conventions differ exactly when bh_n != 0 and r != 1:
    # ours: U(r*h) + bh_n; the other: r*(U*h + bh_n).
    p = dict(CASE_A, bh_n=0.8)
    cell = scalar_cell(p)
    x, h = 0.2, 0.9
    with torch.no_grad():
        out = float(cell(torch.tensor([[x]], dtype=torch.float64),
                         torch.tensor([[h]], dtype=torch.float64)))
    sig = lambda v: 1.0 / (1.0 + math.exp(-v))
    z = sig(p["W_z"] * x + p["bi_z"] + p["U_z"] * h + p["bh_z"])
    r = sig(p["W_r"] * x + p["bi_r"] + p["U_r"] * h + p["bh_r"])
    inside = math.tanh(p["W_n"] * x + p["bi_n"] + p["U_n"] * (r * h) + p["bh_n"])
    outside = math.tanh(p["W_n"] * x + p["bi_n"] + r * (p["U_n"] * h + p["bh_n"]))
    assert inside != pytest.approx(outside)
    assert out == pytest.approx((1 - z) * h + z * inside, abs=1e-12)


def test_xavier_init_std_per_gate():
    torch.manual_seed(0)
    cell = GRUCell(1280, 128)
    target = xavier_normal_std(1280, 128)
    for g in range(3):
        block = cell.weight_ih[g * 128:(g + 1) * 128]
        assert float(block.std()) == pytest.approx(target, rel=0.10)
    assert math.isclose(target, math.sqrt(2 / 1408), rel_tol=1e-12)
    assert float(cell.bias_ih.abs().max()) == 0.0


def test_parameter_count_formula():
    cell = GRUCell(1280, 128)
    n = sum(p.numel() for p in cell.parameters())
    assert n == 3 * (1280 * 128 + 128 * 128 + 2 * 128) == 541440

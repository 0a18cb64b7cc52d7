import numpy as np
import pytest
import torch
from oracles import brute_force_assignment

from planeformer.matching import (
    MatchingError,
    cost_matrix,
    match,
    matching_cost,
    pad_ground_truth,
    solve_matching,
)


def test_padding_cases():
    params = np.random.default_rng(0).normal(size=(3, 3))
    gt = pad_ground_truth(params, np.full((3, 2), 0.5), 20)
    assert gt.K == 20 and gt.num_planes == 3
    assert gt.labels.tolist() == [1] * 3 + [0] * 17
    full = pad_ground_truth(np.ones((4, 3)), np.zeros((4, 2)), 4)
    assert full.labels.tolist() == [1, 1, 1, 1]
    empty = pad_ground_truth(np.zeros((0, 3)), np.zeros((0, 2)), 5)
    assert empty.labels.sum() == 0 and empty.num_planes == 0
    with pytest.raises(MatchingError, match="increase"):
        pad_ground_truth(np.ones((5, 3)), np.zeros((5, 2)), 4)


def test_matching_cost_examples():
    assert matching_cost(0, None, None, 0.1, None, None) == pytest.approx(-0.9)
    n = (0.1, -0.2, 0.3)
    assert matching_cost(1, n, (0.2, 0.4), 1.0, n, (0.2, 0.4)) == pytest.approx(-1.0)
    assert matching_cost(1, (0, 0, 0.5), (0.3, 0.3), 0.5, (0, 0, 1), (0.3, 0.3)) == pytest.approx(0.0)
    # center term is omega times the plain Euclidean distance
    assert matching_cost(1, n, (0, 0), 1.0, n, (0.3, 0.4), omega=2.0) == pytest.approx(-1 + 2 * 0.5)
    assert matching_cost(1, n, (0, 0), 1.0, n, (0.3, 0.4), use_center=False) == pytest.approx(-1)


def test_cost_matrix_matches_scalar_cost():
    rng = np.random.default_rng(1)
    K, M = 6, 4
    gt = pad_ground_truth(rng.normal(size=(M, 3)), rng.uniform(size=(M, 2)), K)
    logits = torch.as_tensor(rng.normal(size=(K, 2)))
    params = torch.as_tensor(rng.normal(size=(K, 3)))
    centers = torch.as_tensor(rng.uniform(size=(K, 2)))
    C = cost_matrix(gt, logits, params, centers, omega=2.0)
    prob = logits.softmax(-1)[:, 1].numpy()
    for i in range(K):
        for j in range(K):
            ref = matching_cost(int(gt.labels[i]), gt.params[i].numpy(), gt.centers[i].numpy(), prob[j],
                                params[j].numpy(), centers[j].numpy(), 2.0)
            assert C[i, j] == pytest.approx(ref, abs=1e-12)
    C0 = cost_matrix(gt, logits, params, None)
    for i in range(M):
        for j in range(K):
            ref = matching_cost(1, gt.params[i].numpy(), None, prob[j], params[j].numpy(), None, use_center=False)
            assert C0[i, j] == pytest.approx(ref, abs=1e-12)


def test_solve_small_cases():
    assert solve_matching([[3.0]]).sigma.tolist() == [0]
    D = np.full((5, 5), 10.0) - 9.0 * np.eye(5)
    assert solve_matching(D).sigma.tolist() == list(range(5))
    P = np.roll(np.eye(4), 1, axis=1)
    assert solve_matching(-P).sigma.tolist() == [1, 2, 3, 0]


def test_solve_brute_force_200():
    rng = np.random.default_rng(2)
    for _ in range(200):
        c = rng.normal(size=(6, 6))
        res = solve_matching(c)
        assert sorted(res.sigma.tolist()) == list(range(6))
        assert res.total_cost == c[np.arange(6), res.sigma].sum()
        assert res.total_cost == pytest.approx(brute_force_assignment(c), abs=1e-12)


def test_solve_ties_deterministic():
    c = np.zeros((4, 4))
    assert solve_matching(c).sigma.tolist() == solve_matching(c).sigma.tolist()
    assert sorted(solve_matching(c).sigma.tolist()) == [0, 1, 2, 3]


def test_solve_input_errors():
    with pytest.raises(MatchingError):
        solve_matching(np.zeros((2, 3)))
    with pytest.raises(MatchingError):
        solve_matching(np.array([[0.0, np.inf], [1.0, 0.0]]))
    with pytest.raises(MatchingError):
        solve_matching(np.array([[np.nan]]))


def test_permutation_equivariance():
    rng = np.random.default_rng(3)
    K, M = 6, 3
    gt = pad_ground_truth(rng.normal(size=(M, 3)), rng.uniform(size=(M, 2)), K)
    logits = torch.as_tensor(rng.normal(size=(K, 2)))
    params = torch.as_tensor(rng.normal(size=(K, 3)))
    centers = torch.as_tensor(rng.uniform(size=(K, 2)))
    perm = torch.as_tensor(rng.permutation(K))
    a = match(gt, logits, params, centers)
    b = match(gt, logits[perm], params[perm], centers[perm])
    assert b.total_cost == pytest.approx(a.total_cost, abs=1e-12)
    # slot perm[j] of the original is slot j of the permuted set
    assert perm[torch.as_tensor(b.sigma)].tolist() == a.sigma.tolist()


def test_inverse():
    r = solve_matching(-np.roll(np.eye(3), 1, axis=1))
    inv = r.inverse()
    assert all(inv[r.sigma[i]] == i for i in range(3))

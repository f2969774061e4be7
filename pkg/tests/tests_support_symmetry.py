"""Construction of exactly left/right-equivariant policies for tests.

A feedforward policy whose first layer duplicates its rows under the
observation mirror, whose hidden layer has block-exchange structure, and
whose output head combines the two halves through the action mirror
satisfies mean(M_obs x) = M_act mean(x) exactly, so the mirror loss on it
must vanish to machine precision.
"""

import numpy as np
import torch


def _signed_perm_matrix(perm, sign):
    n = len(perm)
    M = np.zeros((n, n))
    for i in range(n):
        M[i, perm[i]] = sign[i]
    return M


def symmetrize_ff_policy(policy, maps):
    """Overwrite the policy weights in place with an equivariant set."""
    S_obs = torch.from_numpy(_signed_perm_matrix(maps.obs_perm, maps.obs_sign))
    S_act = torch.from_numpy(_signed_perm_matrix(maps.act_perm, maps.act_sign))
    lin1, lin2 = [m for m in policy.body if isinstance(m, torch.nn.Linear)]
    head = policy.mean_head
    h = lin1.out_features
    assert h % 2 == 0, "hidden width must be even to split into mirror halves"
    m = h // 2
    g = torch.Generator().manual_seed(0)

    with torch.no_grad():
        A = torch.randn(m, lin1.in_features, generator=g,
                        dtype=torch.float64) * 0.2
        b = torch.randn(m, generator=g, dtype=torch.float64) * 0.1
        lin1.weight.copy_(torch.cat([A, A @ S_obs], dim=0))
        lin1.bias.copy_(torch.cat([b, b]))

        B = torch.randn(m, m, generator=g, dtype=torch.float64) * 0.2
        C = torch.randn(m, m, generator=g, dtype=torch.float64) * 0.2
        c = torch.randn(m, generator=g, dtype=torch.float64) * 0.1
        lin2.weight.copy_(torch.cat([torch.cat([B, C], 1),
                                     torch.cat([C, B], 1)], 0))
        lin2.bias.copy_(torch.cat([c, c]))

        D = torch.randn(head.out_features, m, generator=g,
                        dtype=torch.float64) * 0.2
        head.weight.copy_(torch.cat([D, S_act @ D], dim=1))
        head.bias.zero_()
    return policy


def symmetrize_lstm_policy(policy, maps):
    """Equivariant recurrent policy: every gate gets the paired-row layout."""
    S_obs = torch.from_numpy(_signed_perm_matrix(maps.obs_perm, maps.obs_sign))
    S_act = torch.from_numpy(_signed_perm_matrix(maps.act_perm, maps.act_sign))
    lstm = policy.lstm
    h = lstm.hidden_size
    assert h % 2 == 0
    m = h // 2
    g = torch.Generator().manual_seed(0)

    def paired_in(rows, cols, right):
        A = torch.randn(rows, cols, generator=g, dtype=torch.float64) * 0.2
        return torch.cat([A, A @ right], dim=0)

    def block_hh(rows):
        B = torch.randn(rows, m, generator=g, dtype=torch.float64) * 0.2
        C = torch.randn(rows, m, generator=g, dtype=torch.float64) * 0.2
        return torch.cat([torch.cat([B, C], 1), torch.cat([C, B], 1)], 0)

    swap = torch.zeros(h, h, dtype=torch.float64)
    swap[:m, m:] = torch.eye(m, dtype=torch.float64)
    swap[m:, :m] = torch.eye(m, dtype=torch.float64)

    with torch.no_grad():
        for layer in range(lstm.num_layers):
            right = S_obs if layer == 0 else swap
            w_ih = torch.cat([paired_in(m, lstm.input_size if layer == 0 else h,
                                        right) for _ in range(4)], 0)
            w_hh = torch.cat([block_hh(m) for _ in range(4)], 0)
            b = torch.cat([torch.cat([v, v]) for v in
                           (torch.randn(4, m, generator=g,
                                        dtype=torch.float64) * 0.1)], 0)
            getattr(lstm, f"weight_ih_l{layer}").copy_(w_ih)
            getattr(lstm, f"weight_hh_l{layer}").copy_(w_hh)
            getattr(lstm, f"bias_ih_l{layer}").copy_(b)
            getattr(lstm, f"bias_hh_l{layer}").copy_(torch.zeros_like(b))
        D = torch.randn(policy.mean_head.out_features, m, generator=g,
                        dtype=torch.float64) * 0.2
        policy.mean_head.weight.copy_(torch.cat([D, S_act @ D], dim=1))
        policy.mean_head.bias.zero_()
    return policy

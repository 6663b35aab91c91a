"""Node and edge counts of the window autoencoder and the two-stage model for a
122-signal plant with 10-step windows."""
from tsae import baselines as B, model as M, nn

M_SIG, K = 122, 10

print(f"{'model':22s} {'nodes':>7s} {'edges':>10s}")
for mid in (1, 3):
    nodes, edges = nn.count_params(M.hidden_dims(M_SIG * K, B.MID_LAYER_RATIOS[mid]))
    print(f"{f'AE ({mid} mid layer)':22s} {nodes:7d} {edges:10d}")
nodes, edges = nn.count_params(nn.ratio_dims(M_SIG * K, 5, integral=False))
print(f"{'AE (5 mid, unfloored)':22s} {nodes:7d} {edges:10d}")
nodes, edges = nn.count_params(nn.ratio_dims(M_SIG * K, 5))
print(f"{'AE (5 mid, floored)':22s} {nodes:7d} {edges:10d}")
n1 = nn.count_params(M.hidden_dims(M_SIG * K, [0.5]))
n2 = nn.count_params(M.hidden_dims(M_SIG, [0.1]))
print(f"{'TSAE (AE1 + AE2)':22s} {n1[0] + n2[0]:7d} {n1[1] + n2[1]:10d}")

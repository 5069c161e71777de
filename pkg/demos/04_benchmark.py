"""Linear against quadratic loss forms.

The closed forms scale with N, the explicit pairwise sums with N^2.
"""

from gar import bench

rows = bench.time_losses([256, 512, 1024, 2048], repeats=20)
print(f"{'N':>6} {'loss':>28} {'median ms':>10}")
for r in rows:
    print(f"{r.batch_size:>6} {r.loss_name:>28} {r.median_ns / 1e6:10.3f}")

for n in (1024, 2048):
    q = bench.median_of(rows, n, "pairwise_diff_quadratic")
    lin = bench.median_of(rows, n, "loss_diff")
    print(f"N={n}: quadratic form is {q / lin:.0f}x slower")

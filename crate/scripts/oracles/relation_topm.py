"""Top-m cosine candidates for one new node against 50 visible nodes (seed 9)."""
from index_topn import unit_vectors, dot

vecs = unit_vectors(9, 51, 32)
visible, new = vecs[:50], vecs[50]
scored = sorted(((dot(new, v), "tbl_v%02d" % i) for i, v in enumerate(visible)), key=lambda t: (-t[0], t[1]))
for score, node in scored[:5]:
    print(f'("{node}", {round(score, 4)!r}),')

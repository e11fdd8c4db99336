import time

from fshil.models import build_model, oracle_known_points, SECTION_RADIUS
from fshil.shilnikov import build_section, discover_bands, realized_words

sys_ = build_model()
sec = build_section(sys_, oracle_known_points().fold_point, SECTION_RADIUS)

t0 = time.perf_counter()
bands = discover_bands(sys_, sec, 24)
print(f"discovery: {len(bands)} bands in {time.perf_counter() - t0:.1f}s", flush=True)

for depth, grid in ((4, (50, 100, 200)),):
    for n in grid:
        t0 = time.perf_counter()
        words = realized_words(sys_, sec, depth, n)
        dt = time.perf_counter() - t0
        print(f"depth {depth} scan {n}: {len(words)} words ({dt:.1f}s)", flush=True)

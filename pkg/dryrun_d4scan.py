import numpy as np

from fshil.models import build_model, oracle_known_points, SECTION_RADIUS
from fshil.shilnikov import (
    STD_OPTS,
    build_section,
    discover_bands,
    _sequences,
    _sequence_rep,
    _word_or_none,
    _pi_or_none,
    _nudge_ulps,
)

sys_ = build_model()
sec = build_section(sys_, oracle_known_points().fold_point, SECTION_RADIUS)
bands = discover_bands(sys_, sec, 24)

for seq in [(0, 0, 0, 0), (1, 0, 0, 0)]:
    rep = _sequence_rep(sys_, sec, bands, seq, STD_OPTS)
    tail = _sequence_rep(sys_, sec, bands, seq[1:], STD_OPTS)
    print(f"seq {seq}: rep {rep!r} tail {tail!r}", flush=True)
    hits = []
    img_off = []
    for k in range(-120, 121):
        s = _nudge_ulps(rep, k) if k else rep
        img = _pi_or_none(sys_, sec, s, STD_OPTS)
        if img is not None:
            img_off.append((k, (img - tail) / np.spacing(abs(tail))))
        w = _word_or_none(sys_, sec, s, 4, STD_OPTS)
        if w is not None:
            hits.append((k, w))
    print(f"  {len(hits)} members in +-120 ulp:", [k for k, _ in hits], flush=True)
    for k, w in hits[:6]:
        print(f"   k={k}: halves={w.halves} counts={w.counts}", flush=True)
    offs = [o for _, o in img_off]
    print(f"  img-tail offset range (ulp of tail): {min(offs):.0f} .. {max(offs):.0f}")
    ks = np.array([k for k, _ in img_off], float)
    os_ = np.array(offs, float)
    slope = np.polyfit(ks, os_, 1)[0]
    resid = os_ - np.polyval(np.polyfit(ks, os_, 1), ks)
    print(f"  image lattice pitch {slope:.1f} tail-ulp per s-ulp, jitter rms {resid.std():.1f} tail-ulp")

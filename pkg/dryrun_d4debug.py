import numpy as np

from fshil.models import build_model, oracle_known_points, SECTION_RADIUS
from fshil.shilnikov import (
    STD_OPTS,
    build_section,
    discover_bands,
    _sequences,
    _sequence_rep,
    _cylinder_width_bound,
    _word_or_none,
    _pi_or_none,
    _nudge_ulps,
)

sys_ = build_model()
sec = build_section(sys_, oracle_known_points().fold_point, SECTION_RADIUS)
bands = discover_bands(sys_, sec, 24)
print(f"{len(bands)} bands")


def band_of(s):
    for i, b in enumerate(bands):
        if b.contains(s):
            return i
    return None


seqs = list(_sequences(len(bands), 4, 40))
for seq in seqs[:24]:
    bound = _cylinder_width_bound(sec, bands, seq)
    ulp = np.spacing(abs(bands[seq[0]].mid))
    tail = _sequence_rep(sys_, sec, bands, seq[1:], STD_OPTS)
    rep = _sequence_rep(sys_, sec, bands, seq, STD_OPTS)
    line = f"seq={seq} bound={bound/ulp:.2f}ulp tail={'ok' if tail is not None else 'NONE'}"
    if rep is None:
        print(line + " rep=NONE")
        continue
    img = _pi_or_none(sys_, sec, rep, STD_OPTS)
    if img is None:
        print(line + " rep ok but pi(rep)=escape")
        continue
    off = (img - tail) / np.spacing(abs(tail))
    # walk the chain recording which band each iterate lands in
    chain, s = [], rep
    for _ in range(4):
        chain.append(band_of(s))
        v = _pi_or_none(sys_, sec, s, STD_OPTS)
        if v is None:
            chain.append("esc")
            break
        s = v
    w = _word_or_none(sys_, sec, rep, 4, STD_OPTS)
    print(line + f" img-tail={off:+.1f}ulp chain={chain} word={'ok' if w else 'None'}")

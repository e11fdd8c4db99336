"""Diagnostic: for top depth-4 band sequences, dump per-probe image error
and full-word outcomes around the cascade rep."""
import time

import numpy as np

from fshil.models import (
    SECTION_RADIUS,
    ShilnikovModelParams,
    build_model,
    oracle_known_points,
)
from fshil.shilnikov import (
    STD_OPTS,
    _FULL_BAND_TABLE,
    _cylinder_width_bound,
    _nudge_ulps,
    _pi_or_none,
    _sequence_rep,
    _sequences,
    _word_or_none,
    build_section,
    discover_bands,
)

params = ShilnikovModelParams(1.0, 1.0)
sys_ = build_model(params)
kp = oracle_known_points(params)
sec = build_section(sys_, kp.fold_point, SECTION_RADIUS)

t0 = time.time()
bands = discover_bands(sys_, sec, _FULL_BAND_TABLE, opts=STD_OPTS)
print(f"discovery: {len(bands)} bands in {time.time()-t0:.1f}s", flush=True)

m = 4
seqs = list(_sequences(len(bands), m, 8))
for seq in seqs:
    bound = _cylinder_width_bound(sec, bands, seq)
    ulp = np.spacing(abs(bands[seq[0]].mid))
    print(f"\nseq {seq}: bound {bound:.3e} = {bound/ulp:.2f} ulp", flush=True)
    t0 = time.time()
    rep = _sequence_rep(sys_, sec, bands, seq, STD_OPTS)
    if rep is None:
        print("  rep: None (cascade failed)")
        continue
    tail = _sequence_rep(sys_, sec, bands, seq[1:], STD_OPTS)
    print(f"  rep {rep!r}  tail {tail!r}  cascade {time.time()-t0:.1f}s", flush=True)
    w_direct = _word_or_none(sys_, sec, rep, m, STD_OPTS)
    print(f"  direct word at rep: {w_direct}")
    t0 = time.time()
    errs = []
    hits = []
    n_esc = 0
    for k in range(-40, 41):
        cand = _nudge_ulps(rep, k)
        img = _pi_or_none(sys_, sec, cand, STD_OPTS)
        if img is None:
            n_esc += 1
            continue
        e = img - tail
        errs.append((k, e))
        w = _word_or_none(sys_, sec, cand, m, STD_OPTS)
        if w is not None:
            hits.append((k, e, w))
    ek = np.array([k for k, _ in errs], float)
    ev = np.array([e for _, e in errs], float)
    A = np.vstack([ek, np.ones_like(ek)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, ev, rcond=None)
    resid = ev - (slope * ek + icpt)
    print(f"  fit: slope {slope:.3e}/ulp  icpt {icpt:.3e}  "
          f"resid rms {np.std(resid):.3e}  center k* {-icpt/slope:+.1f}")
    print(f"  probes: {len(errs)} returned, {n_esc} escaped, "
          f"|e| range [{np.min(np.abs(ev)):.2e}, {np.max(np.abs(ev)):.2e}]")
    print(f"  hits: {len(hits)} in {time.time()-t0:.1f}s")
    for k, e, w in hits[:6]:
        print(f"    k={k:+d}  e={e:+.3e}  word={w.halves}|{w.counts}")

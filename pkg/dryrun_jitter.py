import time

import numpy as np

from fshil.models import build_model, oracle_known_points, SECTION_RADIUS
from fshil.shilnikov import (
    STD_OPTS,
    TIGHT_OPTS,
    ReturnOpts,
    build_section,
    discover_bands,
    _pi_or_none,
    _nudge_ulps,
)

sys_ = build_model()
sec = build_section(sys_, oracle_known_points().fold_point, SECTION_RADIUS)
bands = discover_bands(sys_, sec, 4)
s0 = bands[0].mid
MID_OPTS = ReturnOpts(
    smooth_rtol=2.5e-12, smooth_atol=1e-13, slide_rtol=2.5e-11, slide_atol=1e-13
)

for name, opts in (("STD", STD_OPTS), ("MID", MID_OPTS), ("TIGHT", TIGHT_OPTS)):
    t0 = time.perf_counter()
    ks, vals = [], []
    for k in range(-20, 21):
        v = _pi_or_none(sys_, sec, _nudge_ulps(s0, k) if k else s0, opts)
        if v is not None:
            ks.append(k)
            vals.append(v)
    dt = time.perf_counter() - t0
    ks = np.array(ks, float)
    vals = np.array(vals, float)
    coef = np.polyfit(ks, vals, 1)
    resid = vals - np.polyval(coef, ks)
    pitch = coef[0]
    print(
        f"{name}: pitch {pitch:.3e}/ulp, jitter rms {resid.std():.3e} "
        f"(= {resid.std()/abs(pitch):.1f} ulp), {dt/len(ks)*1e3:.0f} ms/eval"
    )

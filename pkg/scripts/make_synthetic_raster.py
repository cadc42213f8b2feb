"""Write the synthetic coastal shakemap pair (ln-mean PGA, ln-sigma) as ESRI ASCII grids.

The mean field is closed form: ln PGA = ln(1.0 g) - 0.9 * max(lon + 124.5, 0),
i.e. 1 g along the coast decaying eastward; sigma is a constant 0.6. The
grid spans 38-50 N, 127-115 W at 0.1 degree cells. Rebuild with:

    python scripts/make_synthetic_raster.py [out_dir]
"""

import sys
from pathlib import Path

from seisgrid.hazard import synthetic_coastal_raster, write_raster

if __name__ == "__main__":
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "src/seisgrid/data"
    raster = synthetic_coastal_raster()
    write_raster(raster, out / "shakemap_mean.asc", out / "shakemap_sigma.asc")
    print(f"wrote {raster.n_rows}x{raster.n_cols} grids to {out}")

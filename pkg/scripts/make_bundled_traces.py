"""Regenerate the synthetic example traces shipped in ``phasenoise/data``.

Both traces are noiseless evaluations of the extended spectrum model
(k_ref = k_vco = 3) on 100 points per decade from 1 Hz to 10 MHz.
"""

from pathlib import Path

import numpy as np

from phasenoise.io import write_psd_csv
from phasenoise.model import SpectrumModelParams, extended_psd
from phasenoise.spectral import PsdTrace

TRACES = {
    "ubx_synthetic.csv": SpectrumModelParams(0.58, 1865.7, 197.9e3, 1439.8e3),
    "cbx_synthetic.csv": SpectrumModelParams(0.557, 538.7, 26.6e3, 1487e3),
}


def main() -> None:
    out = Path(__file__).resolve().parents[1] / "src" / "phasenoise" / "data"
    f = np.logspace(0.0, 7.0, 701)
    for name, params in TRACES.items():
        write_psd_csv(PsdTrace(f, extended_psd(params, f)), out / name)
        print(out / name)


if __name__ == "__main__":
    main()

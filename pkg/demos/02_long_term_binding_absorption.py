"""Long-horizon binding and absorption for the two packaged antibodies.

Runs the full two-phase pipeline (injection + 36 h reduced model) for the
high-pI and lower-pI example molecules at one buffer pH and compares their
free / bound / absorbed histories and plume volumes.

Run time: a few minutes on desk-scale meshes.
"""

import numpy as np

import depotsim as ds
from depotsim.orchestrator import Simulation

BUFFER_PH = 5.0

results = {}
for drug in ("ipilimumab_like", "igg1_like"):
    config = ds.default_config().with_values({
        "mesh.fine_nr": 72, "mesh.fine_nz": 72, "mesh.fine_grading": 1.035,
        "mesh.coarse_nr": 40, "mesh.coarse_nz": 40,
        "phases.short_dt_s": 0.05,
        "formulation.drug": drug, "formulation.buffer_ph": BUFFER_PH,
    })
    print(f"running {drug} at buffer pH {BUFFER_PH} ...")
    results[drug] = Simulation(config).run_pipeline()

print(f"\ndose split at t = 30 h (buffer pH {BUFFER_PH}):")
print(f"{'molecule':18s} {'free %':>8s} {'bound %':>8s} {'absorbed %':>11s}")
for drug, res in results.items():
    at = res.series.at_time(30 * 3600.0)
    print(f"{drug:18s} {at['free_pct']:8.2f} {at['bound_pct']:8.2f} "
          f"{at['absorbed_pct']:11.2f}")

ipi = results["ipilimumab_like"].series
igg = results["igg1_like"].series
print("\nthe strongly protonated molecule is pushed out of the salt-rich "
      "depot,\nreaches the lymphatic-dense dermis sooner, and is absorbed "
      "faster,\nleaving less free drug behind.")

for drug, res in results.items():
    s = res.series
    t = np.asarray(s.time)
    pv = s.column("plume_volume_cm3")
    k = np.argmax(pv)
    print(f"{drug}: plume peaks at {pv[k]:.1f} cm^3 around t = {t[k]/3600:.1f} h")
    print(f"   ledger closure residual: {res.ledger.closure_residual():+.2e}")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    print("matplotlib not available; skipping the figure")
else:
    fig, axes = plt.subplots(1, 2, figsize=(9.5, 3.4), constrained_layout=True)
    for drug, res in results.items():
        s = res.series
        t_h = np.asarray(s.time) / 3600.0
        for name, style in (("free_pct", "-"), ("bound_pct", ":"),
                            ("absorbed_pct", "--")):
            axes[0].plot(t_h, s.column(name), style,
                         label=f"{drug.split('_')[0]} {name.split('_')[0]}")
        axes[1].plot(t_h, s.column("plume_volume_cm3"),
                     label=drug.split("_")[0])
    axes[0].set(xlabel="t (h)", ylabel="% of dose", title="dose split")
    axes[0].legend(fontsize=7)
    axes[1].set(xlabel="t (h)", ylabel="plume volume (cm$^3$)",
                title="half-maximum plume")
    axes[1].legend()
    fig.savefig("demo02_long_term.png", dpi=130)
    print("figure written to demo02_long_term.png")

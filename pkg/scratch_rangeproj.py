import numpy as np
from qact.examples import finite_action
from qact import galois

for name in ["c_z2_translation", "c_z2_trivial_c2", "c_z2_free_plus_trivial",
              "swap2", "c_s3_ad_m2", "c_s3_translation"]:
    act = finite_action(name)
    n_pi = len(act.regular().irreps)
    for pi in range(n_pi):
        rep = galois.range_projection_report(act, pi)
        print(f"{name} pi={pi}: rank={rep.rank}/{rep.target_dimension}"
              f" idem={rep.idempotent:.2e} ab={rep.agreement_bvalued:.2e}"
              f" ac={rep.agreement_crossed:.2e} mod={rep.module_commutation:.2e} corner={rep.corner_centrality:.2e}")
    eq = galois.freeness_equivalence_report(act)
    print(f"  equivalence: ellwood={eq.ellwood_free} saturated={eq.saturated}"
          f" components_full={eq.all_components_full} consistent={eq.consistent}"
          f" isometry={eq.isometry_defect:.2e}")

import numpy as np
from qact.examples import finite_action
from qact.crossed import CrossedProduct
from qact import galois

for name in ["c_z2_translation", "c_s3_translation", "c_z2_trivial_c2",
             "swap2", "c_s3_ad_m2", "c_z2_free_plus_trivial", "dual_s3_translation"]:
    act = finite_action(name)
    cp = CrossedProduct(act)
    dec = cp.decomposition()
    sat = galois.saturation_report(act)
    ell = galois.ellwood_report(act)
    print(f"{name}: blocks={dec.block_dims} ideal={sat.ideal_dimension}/{sat.full_dimension}"
          f" ellwood defects={ell.per_component_defect} global={ell.global_defect}"
          f" additive={ell.additive}")
    # representation checks
    rng = np.random.default_rng(1)
    a = act.A.random_vec(rng)
    r1 = np.linalg.norm(cp.pi_red(cp.rho_vec(a)) - cp.gns_left(a))
    r2 = np.linalg.norm(cp.pi_red(cp.jones_vec) - cp.jones_gns())
    x, y = act.A.random_vec(rng), act.A.random_vec(rng)
    r3 = np.linalg.norm(
        cp.pi_red(cp.basic_vec(x, y))
        - cp.gns_left(x) @ cp.jones_gns() @ cp.gns_left(y).conj().T
    )
    lamphi = cp.dual_rep(act.qg.haar)
    r4 = np.linalg.norm(lamphi @ lamphi - lamphi)
    om = rng.standard_normal(act.qg.dim) + 1j * rng.standard_normal(act.qg.dim)
    nu = rng.standard_normal(act.qg.dim) + 1j * rng.standard_normal(act.qg.dim)
    r5 = np.linalg.norm(
        cp.dual_rep(act.qg.convolve(om, nu)) - cp.dual_rep(om) @ cp.dual_rep(nu)
    )
    print(f"   pired(rho)={r1:.2e} pired(eB)={r2:.2e} pired(basic)={r3:.2e}"
          f" lamphi proj={r4:.2e} lam hom={r5:.2e}")
    P = cp.free_part_projection()
    print(f"   P idem={np.linalg.norm(P@P-P):.2e} trace={np.trace(P).real:.3f}")

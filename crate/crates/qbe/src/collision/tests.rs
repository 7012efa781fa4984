use super::*;
use crate::grid::{bose_einstein, entropy_variable, moment, GridSpec};
use crate::physics::ParamInputs;
use crate::sampling::random_profiles;

fn params() -> PhysicalParams {
    PhysicalParams::new(&ParamInputs::default()).unwrap()
}

fn lattice(n: usize) -> Arc<RadialGrid> {
    Arc::new(RadialGrid::build(&GridSpec::lattice(n, 3.5), &params()).unwrap())
}

fn quad(panels: usize) -> Arc<RadialGrid> {
    Arc::new(RadialGrid::build(&GridSpec::quadrature(panels, 8, 3.5), &params()).unwrap())
}

fn l1(g: &RadialGrid, v: &[f64]) -> f64 {
    g.integrate(&v.iter().map(|x| x.abs()).collect::<Vec<_>>())
}

fn random_states(g: &Arc<RadialGrid>, seed: u64, n: usize) -> Vec<DistributionState> {
    random_profiles(seed, g.u_max, n)
        .iter()
        .map(|p| p.sample(g.clone()).unwrap())
        .collect()
}

#[test]
fn zero_state_gives_zero_rates() {
    for g in [lattice(32), quad(4)] {
        let op = CollisionOperator::new(&params(), g.clone());
        let z = DistributionState::zeros(g.clone());
        let r = op.q_apply(&z).unwrap();
        assert!(r.c12.iter().chain(&r.c22).chain(&r.q).all(|v| *v == 0.0));
        let (gain, loss) = op.c12_split(&z).unwrap();
        assert!(gain.iter().all(|v| *v == 0.0));
        // spontaneous decay survives; the lowest lattice node has no decay channel
        assert!(loss[1..].iter().all(|v| *v > 0.0));
        let (g22, l22) = op.c22_split(&z).unwrap();
        assert!(g22.iter().chain(&l22).all(|v| *v == 0.0));
    }
}

#[test]
fn lattice_equilibrium_is_fixed_point() {
    let g = lattice(64);
    let op = CollisionOperator::new(&params(), g.clone());
    for c in [0.3, 1.0, 3.0] {
        let be = bose_einstein(c, g.clone()).unwrap();
        let r = op.q_apply(&be).unwrap();
        let ratio = l1(&g, &r.q) / l1(&g, &r.gain).max(1.0);
        assert!(ratio < 1e-13, "c = {c}: {ratio}");
    }
}

#[test]
fn quadrature_equilibrium_residual_shrinks_under_refinement() {
    let p = params();
    let mut prev = f64::INFINITY;
    for panels in [4, 8, 16] {
        let g = quad(panels);
        let op = CollisionOperator::new(&p, g.clone());
        let be = bose_einstein(1.0, g.clone()).unwrap();
        let r = op.q_apply(&be).unwrap();
        let ratio = l1(&g, &r.q) / l1(&g, &r.gain).max(1.0);
        assert!(ratio < prev, "{panels}: {ratio} vs {prev}");
        prev = ratio;
    }
}

#[test]
fn lattice_conservation_on_random_states() {
    let g = lattice(48);
    let op = CollisionOperator::new(&params(), g.clone());
    for s in random_states(&g, 1, 20) {
        let r = op.q_apply(&s).unwrap();
        let scale = g.integrate(
            &r.gain
                .iter()
                .zip(&g.energies)
                .map(|(a, e)| a * e)
                .collect::<Vec<_>>(),
        );
        let e12 = op.weak_form(&s, &g.energies, Which::C12).unwrap();
        let e22 = op.weak_form(&s, &g.energies, Which::C22).unwrap();
        let ones = vec![1.0; g.len()];
        let m22 = op.weak_form(&s, &ones, Which::C22).unwrap();
        let mscale = g.integrate(&r.gain);
        assert!(e12.abs() <= 1e-13 * scale, "{e12} vs {scale}");
        assert!(e22.abs() <= 1e-13 * scale, "{e22} vs {scale}");
        assert!(m22.abs() <= 1e-13 * mscale, "{m22} vs {mscale}");
    }
}

#[test]
fn split_recombination_and_positivity() {
    for g in [lattice(40), quad(4)] {
        let op = CollisionOperator::new(&params(), g.clone());
        for s in random_states(&g, 2, 30) {
            let c12 = op.c12_apply(&s).unwrap();
            let (g12, l12) = op.c12_split(&s).unwrap();
            let c22 = op.c22_apply(&s).unwrap();
            let (g22, l22) = op.c22_split(&s).unwrap();
            let (q2, q3) = op.c22_parts(&s).unwrap();
            for i in 0..g.len() {
                let f = s.values[i];
                assert!(g12[i] >= 0.0 && l12[i] >= 0.0 && g22[i] >= 0.0 && l22[i] >= 0.0);
                let sc12 = g12[i] + f * l12[i] + 1e-300;
                assert!((g12[i] - f * l12[i] - c12[i]).abs() <= 1e-10 * sc12);
                let sc22 = g22[i] + f * l22[i] + 1e-300;
                assert!((g22[i] - f * l22[i] - c22[i]).abs() <= 1e-10 * sc22);
                assert!((q2[i] + q3[i] - c22[i]).abs() <= 1e-10 * sc22);
            }
        }
    }
}

#[test]
fn entropy_dissipation_nonpositive() {
    let g = lattice(48);
    let op = CollisionOperator::new(&params(), g.clone());
    for s in random_states(&g, 3, 20) {
        let phi: Vec<f64> = s.values.iter().map(|&f| entropy_variable(f)).collect();
        for which in [Which::C12, Which::C22, Which::Q] {
            let d = op.weak_form(&s, &phi, which).unwrap();
            assert!(d <= 0.0, "{which:?}: {d}");
        }
    }
}

#[test]
fn c22_vanishes_below_cutoff() {
    let p = params();
    let g = Arc::new(RadialGrid::build(&GridSpec::lattice(32, 0.8 * p.p0), &p).unwrap());
    let op = CollisionOperator::new(&p, g.clone());
    let s = random_states(&g, 4, 1).pop().unwrap();
    assert!(op.c22_apply(&s).unwrap().iter().all(|v| *v == 0.0));
}

#[test]
fn rate_sum_matches_mass_production() {
    // phi = 1 on C12 gives the mass production functional
    let g = lattice(48);
    let op = CollisionOperator::new(&params(), g.clone());
    let s = random_states(&g, 5, 1).pop().unwrap();
    let ones = vec![1.0; g.len()];
    let w = op.weak_form(&s, &ones, Which::C12).unwrap();
    let direct = g.integrate(&op.c12_apply(&s).unwrap());
    assert_eq!(w, direct);
    assert!(moment(&s, 0.0) > 0.0);
}

#[test]
fn conservation_fix_removes_energy_production() {
    let g = quad(4);
    let op = CollisionOperator::new(&params(), g.clone());
    let s = random_states(&g, 6, 1).pop().unwrap();
    let mut q = op.q_apply(&s).unwrap().q;
    conservation_fix(&g, &s.values, &mut q);
    let e: f64 = g.integrate(&q.iter().zip(&g.energies).map(|(a, b)| a * b).collect::<Vec<_>>());
    let scale: f64 = g.integrate(&q.iter().zip(&g.energies).map(|(a, b)| (a * b).abs()).collect::<Vec<_>>());
    assert!(e.abs() <= 1e-14 * scale);
}

#[test]
fn lattice_and_quadrature_agree() {
    let p = params();
    let gl = lattice(96);
    let gq = quad(12);
    let prof = &random_profiles(8, 3.5, 1)[0];
    let sl = prof.sample(gl.clone()).unwrap();
    let sq = prof.sample(gq.clone()).unwrap();
    let rl = CollisionOperator::new(&p, gl.clone()).q_apply(&sl).unwrap();
    let rq = CollisionOperator::new(&p, gq.clone()).q_apply(&sq).unwrap();
    // compare weak forms with a smooth test function
    let phi = |u: f64| (-u).exp();
    for (a, b) in [(&rl.c12, &rq.c12), (&rl.c22, &rq.c22)] {
        let wl = gl.integrate(&a.iter().zip(&gl.nodes).map(|(c, u)| c * phi(*u)).collect::<Vec<_>>());
        let wq = gq.integrate(&b.iter().zip(&gq.nodes).map(|(c, u)| c * phi(*u)).collect::<Vec<_>>());
        let sc = gq.integrate(&b.iter().zip(&gq.nodes).map(|(c, u)| (c * phi(*u)).abs()).collect::<Vec<_>>());
        assert!((wl - wq).abs() <= 0.05 * sc, "{wl} vs {wq} (scale {sc})");
    }
}

#[test]
fn quadrature_c22_energy_production_shrinks_with_refinement() {
    let p = params();
    let base = GridSpec::quadrature(8, 8, 3.5);
    let prod = |spec: &GridSpec| {
        let g = Arc::new(RadialGrid::build(spec, &p).unwrap());
        let s = DistributionState::from_fn(g.clone(), |u| 0.8 * (-((u - 1.2) / 0.4).powi(2)).exp()).unwrap();
        let c = CollisionOperator::new(&p, g.clone()).rates(&s, Which::C22).unwrap();
        let num: f64 = (0..g.len()).map(|i| g.measure[i] * g.energies[i] * c[i]).sum();
        let den: f64 = (0..g.len()).map(|i| g.measure[i] * g.energies[i] * c[i].abs()).sum();
        (num / den).abs()
    };
    let (a, b) = (prod(&base), prod(&base.refined(2)));
    assert!(a < 2e-2 && b < 0.25 * a, "{a:e} -> {b:e}");
}

#[test]
fn quadrature_panels_put_an_edge_at_the_cutoff() {
    let p = params();
    let g = quad(8);
    // nodes of one panel sit on one side of p0
    let below = g.nodes.iter().filter(|&&u| u < p.p0).count();
    assert_eq!(below % 8, 0);
}

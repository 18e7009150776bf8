use fockcascade::discriminate::{check_stage_orthogonality, DiscriminationInstance};
use fockcascade::measurement::condition;
use fockcascade::network::LinearNetwork;
use fockcascade::nogo::instance_rng;
use fockcascade::oracle::{
    apply_network_dense, compare_instance, embed, phase_insensitive_distance,
    project_outcome_dense, FockBasis, OracleCheckConfig,
};
use fockcascade::random::{haar_unitary, random_homogeneous, random_orthogonal_states};
use fockcascade::{CreationPolynomial, ModeRegistry};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn two_paths_agree(seed in any::<u64>(), index in 0usize..1000) {
        let cfg = OracleCheckConfig { seed, ..Default::default() };
        let r = compare_instance(&cfg, index).unwrap();
        prop_assert!(r.passed, "{:?}", r);
    }

    #[test]
    fn normalized_conditionals_agree(seed in any::<u64>()) {
        let mut rng = instance_rng(seed, 0);
        let modes = rng.random_range(2..=4usize);
        let photons = rng.random_range(1..=3u32);
        let labels: Vec<String> = (0..modes).map(|k| format!("m{k}")).collect();
        let reg = ModeRegistry::new(labels).unwrap();
        let all: Vec<_> = reg.modes().collect();
        let p = random_homogeneous(&reg, &all, photons, &mut rng).unwrap();
        let net = LinearNetwork::from_matrix(haar_unitary(modes, &mut rng), &reg).unwrap();
        let b = FockBasis::new(modes, photons);
        let dense = apply_network_dense(&embed(&p, &b).unwrap(), &net, &b).unwrap();
        let out = net.substitute(&p).unwrap();
        let c = rng.random_range(0..modes);
        for n in 0..=photons {
            let (proj, reduced, w) = project_outcome_dense(&dense, c, n, &b).unwrap();
            let cond = condition(&out, reg.mode_at(c).unwrap(), n).unwrap();
            prop_assert!((cond.weight - w).abs() <= 1e-9);
            if w > 1e-12 {
                let q = embed(&cond.state, &reduced).unwrap();
                prop_assert!(phase_insensitive_distance(&q, &proj) <= 1e-9);
            }
        }
    }

    #[test]
    fn auxiliary_photons_never_repair_a_failing_stage(seed in any::<u64>()) {
        let mut rng = instance_rng(seed, 1);
        let sys_modes = rng.random_range(2..=3usize);
        let photons = rng.random_range(1..=2u32);
        let mut labels: Vec<String> = (0..sys_modes).map(|k| format!("a{k}")).collect();
        labels.push("b".into());
        let reg = ModeRegistry::new(labels).unwrap();
        let sys: Vec<_> = reg.modes().take(sys_modes).collect();
        let states = random_orthogonal_states(&reg, &sys, photons, 2, &mut rng).unwrap();
        let b = CreationPolynomial::creation(&reg, reg.mode("b").unwrap());
        let aux = b.add(&CreationPolynomial::constant(&reg, Complex64::new(0.5, 0.2))).unwrap();
        let with_aux = DiscriminationInstance::new(states, aux, None).unwrap();
        let net = LinearNetwork::from_matrix(haar_unitary(reg.len(), &mut rng), &reg).unwrap();
        let c = reg.mode_at(rng.random_range(0..reg.len())).unwrap();
        let bare = check_stage_orthogonality(&with_aux.without_aux(), &net, c).unwrap();
        let helped = check_stage_orthogonality(&with_aux, &net, c).unwrap();
        if !bare.passed() {
            prop_assert!(!helped.passed());
        }
    }
}

#[test]
fn hom_distribution_both_paths() {
    let reg = ModeRegistry::new(["c1", "c2"]).unwrap();
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let net = LinearNetwork::from_matrix(
        nalgebra::DMatrix::from_row_slice(2, 2, &[h, h, h, -h]),
        &reg,
    )
    .unwrap();
    let a1 = CreationPolynomial::creation(&reg, reg.mode("c1").unwrap());
    let a2 = CreationPolynomial::creation(&reg, reg.mode("c2").unwrap());
    let input = a1.mul(&a2).unwrap();
    let b = FockBasis::new(2, 2);
    let dense = apply_network_dense(&embed(&input, &b).unwrap(), &net, &b).unwrap();
    let out = net.substitute(&input).unwrap();
    for (n, want) in [(0, 0.5), (1, 0.0), (2, 0.5)] {
        let cond = condition(&out, reg.mode("c1").unwrap(), n).unwrap();
        let (_, _, w) = project_outcome_dense(&dense, 0, n, &b).unwrap();
        assert!((cond.weight - want).abs() < 1e-12);
        assert!((w - want).abs() < 1e-12);
    }
}

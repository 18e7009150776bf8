use fockcascade::nogo::{
    build_m_prime, commutation_lemma_residual, instance_rng, random_instance, NoGoSetup,
    SuiteConfig,
};
use fockcascade::random::random_polynomial;
use num_complex::Complex64;

fn setups(seed: u64, count: usize) -> Vec<NoGoSetup> {
    let cfg = SuiteConfig {
        seed,
        count,
        ..Default::default()
    };
    (0..count)
        .map(|k| {
            let inst = random_instance(&cfg, k).unwrap();
            NoGoSetup::new(&inst.aux, &inst.states, &inst.network, inst.measured).unwrap()
        })
        .collect()
}

#[test]
fn direct_overlaps_expand_in_u_prime() {
    for (idx, setup) in setups(11, 40).iter().enumerate() {
        let tables = setup.coefficient_tables();
        let up = setup.gram_vector_u_prime(0, 1).unwrap();
        for s in 0..=setup.n_s() {
            let lo = s.saturating_sub(setup.n_a());
            for n in lo..=s {
                for m in lo..=s {
                    let direct = setup.compute_c(s, n, m, 0, 1).unwrap();
                    let expanded: Complex64 = (0..=setup.n_s())
                        .map(|p| up[p as usize] * tables.a(s, p, n, m))
                        .sum();
                    let scale = setup.c_scale(s, n, m, 0, 1).unwrap().max(1e-300);
                    assert!(
                        (direct - expanded).norm() <= 1e-9 * scale,
                        "instance {idx}: C^({s})_({n},{m})"
                    );
                }
            }
        }
    }
}

#[test]
fn m_prime_rows_sum_a() {
    for setup in setups(12, 30) {
        let t = setup.coefficient_tables();
        let mp = build_m_prime(&t);
        for s in 0..=t.n_s {
            for p in 0..=t.n_s {
                let lo = s.saturating_sub(t.n_a);
                let mut sum = 0.0;
                for n in lo..=s {
                    for m in lo..=s {
                        sum += t.a(s, p, n, m);
                    }
                }
                assert_eq!(mp[(s as usize, p as usize)], sum);
            }
        }
    }
}

#[test]
fn commutation_lemma_on_random_probes() {
    for (idx, setup) in setups(13, 30).iter().enumerate() {
        let rest = setup.aux_expansion().remaining_registry().clone();
        let modes: Vec<_> = rest.modes().collect();
        let mut rng = instance_rng(99, idx);
        let probe = random_polynomial(&rest, &modes, 2, &mut rng).unwrap();
        let scale = probe.norm_sqr().sqrt().max(1.0);
        for n in 0..=setup.n_a() {
            for m in 0..=setup.n_s() {
                let res = commutation_lemma_residual(setup, 0, n, m, &probe).unwrap();
                assert!(res <= 1e-10 * scale, "instance {idx} n={n} m={m}: {res}");
            }
        }
    }
}

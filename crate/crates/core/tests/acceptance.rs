//! Acceptance checks; one line per criterion, nonzero exit on any failure.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;
use std::time::Instant;

use fockcascade::discriminate::{
    check_cascade_discrimination, necessary_condition_probe, DiscriminationInstance,
};
use fockcascade::measurement::{condition, Branch};
use fockcascade::network::{LinearNetwork, ModeRef};
use fockcascade::nogo::{
    instance_rng, random_instance, run_suite, summarize, NoGoSetup, SuiteConfig,
};
use fockcascade::oracle::{
    apply_network_dense, embed, project_outcome_dense, run_oracle_check, FockBasis,
    OracleCheckConfig,
};
use fockcascade::poly::normal_order_pair;
use fockcascade::random::{haar_unitary, random_homogeneous, random_orthogonal_states};
use fockcascade::{CascadeStrategy, CreationPolynomial, ModeRegistry};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

struct Line {
    pass: bool,
    detail: String,
}

fn line(pass: bool, detail: impl Into<String>) -> Line {
    Line {
        pass,
        detail: detail.into(),
    }
}

fn theorem_suite() -> (Line, Line) {
    let cfg = SuiteConfig::default();
    let start = Instant::now();
    let outcomes = match run_suite(&cfg) {
        Ok(o) => o,
        Err(e) => {
            return (
                line(false, format!("suite error: {e}")),
                line(false, "suite did not run"),
            )
        }
    };
    let secs = start.elapsed().as_secs_f64();
    let summary = summarize(&outcomes);
    let pairs: usize = outcomes.iter().map(|o| o.report.pairs.len()).sum();
    let residuals_ok = outcomes
        .iter()
        .all(|o| o.report.pairs.iter().all(|p| p.residual_ok));
    let first = line(
        residuals_ok && outcomes.len() == 200 && secs < 60.0,
        format!(
            "theorem suite: {} instances, {pairs} state pairs, max |V - M'U'| ratio {:.2e}, {secs:.2} s",
            outcomes.len(),
            summary.max_residual_ratio
        ),
    );
    let det_ok = outcomes
        .iter()
        .all(|o| o.report.det_ok && o.report.diag_ok && o.report.triangular);
    let second = line(
        det_ok,
        format!(
            "determinant and diagonal: max det deviation {:.2e}, max diagonal deviation {:.2e}",
            summary.max_det_deviation, summary.max_diag_deviation
        ),
    );
    (first, second)
}

fn recurrence_equivalence() -> Line {
    let cfg = SuiteConfig {
        seed: 1,
        count: 100,
        ..Default::default()
    };
    let mut checked = 0usize;
    let mut worst: f64 = 0.0;
    let mut worst_sym: f64 = 0.0;
    for k in 0..cfg.count {
        let inst = match random_instance(&cfg, k) {
            Ok(i) => i,
            Err(e) => return line(false, format!("instance {k}: {e}")),
        };
        let setup = match NoGoSetup::new(&inst.aux, &inst.states, &inst.network, inst.measured) {
            Ok(s) => s,
            Err(e) => return line(false, format!("instance {k}: {e}")),
        };
        for (i, j) in [(0, 1), (1, 0), (0, 0)] {
            for s in 0..=setup.n_s() {
                let lo = s.saturating_sub(setup.n_a());
                for n in lo..=s {
                    for m in lo..=s {
                        let direct = setup.compute_c(s, n, m, i, j).unwrap();
                        let scale = setup.c_scale(s, n, m, i, j).unwrap();
                        if scale == 0.0 {
                            continue;
                        }
                        let swapped = setup.compute_c(s, m, n, i, j).unwrap();
                        worst_sym = worst_sym.max((direct - swapped).norm() / scale);
                        if n >= m {
                            let rec = setup.recurrence_c(s, n, m, i, j).unwrap();
                            worst = worst.max((direct - rec).norm() / scale);
                            checked += 1;
                        }
                    }
                }
            }
        }
    }
    line(
        worst <= 1e-9 && worst_sym <= 1e-9,
        format!(
            "recurrence vs direct overlaps: {checked} entries on 100 instances, max relative gap {worst:.2e}, symmetry gap {worst_sym:.2e}"
        ),
    )
}

type Word = BTreeMap<(u32, u32), u128>;

fn contraction(m: u32, n: u32) -> Word {
    let mut w = Word::from([((n, 0), 1)]);
    for _ in 0..m {
        let mut next = Word::new();
        for (&(p, q), &x) in &w {
            *next.entry((p, q + 1)).or_default() += x;
            if p > 0 {
                *next.entry((p - 1, q)).or_default() += x * p as u128;
            }
        }
        w = next;
    }
    w
}

fn normal_ordering() -> Line {
    let mut mismatches = Vec::new();
    for m in 0..=5 {
        for n in 0..=5 {
            let closed: Word = normal_order_pair(m, n)
                .into_iter()
                .map(|(k, x)| ((n - k, m - k), x))
                .collect();
            if closed != contraction(m, n) {
                mismatches.push((m, n));
            }
        }
    }
    let two_two: Vec<u128> = normal_order_pair(2, 2).into_iter().map(|(_, x)| x).collect();
    line(
        mismatches.is_empty() && two_two == [1, 4, 2],
        format!(
            "normal ordering: 36 (m, n) pairs exact, (2,2) -> {two_two:?}, mismatches {mismatches:?}"
        ),
    )
}

fn hadamard(r: &Arc<ModeRegistry>) -> LinearNetwork {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    LinearNetwork::from_matrix(DMatrix::from_row_slice(2, 2, &[h, h, h, -h]), r).unwrap()
}

fn oracle_equivalence() -> Line {
    let results = match run_oracle_check(&OracleCheckConfig::default()) {
        Ok(r) => r,
        Err(e) => return line(false, format!("oracle error: {e}")),
    };
    let failed = results.iter().filter(|r| !r.passed).count();
    let worst = results
        .iter()
        .flat_map(|r| {
            [
                r.amplitude_deviation,
                r.weight_deviation,
                r.conditional_deviation,
                r.phase_insensitive_deviation,
            ]
        })
        .fold(0.0, f64::max);

    let reg = ModeRegistry::new(["c1", "c2"]).unwrap();
    let net = hadamard(&reg);
    let a1 = CreationPolynomial::creation(&reg, reg.mode("c1").unwrap());
    let a2 = CreationPolynomial::creation(&reg, reg.mode("c2").unwrap());
    let input = a1.mul(&a2).unwrap();
    let out = net.substitute(&input).unwrap();
    let basis = FockBasis::new(2, 2);
    let dense = apply_network_dense(&embed(&input, &basis).unwrap(), &net, &basis).unwrap();
    let mut hom = Vec::new();
    let mut hom_ok = true;
    for (n, want) in [(0u32, 0.5), (1, 0.0), (2, 0.5)] {
        let w_poly = condition(&out, reg.mode("c1").unwrap(), n).unwrap().weight;
        let w_dense = project_outcome_dense(&dense, 0, n, &basis).unwrap().2;
        hom_ok &= (w_poly - want).abs() <= 1e-9 && (w_dense - want).abs() <= 1e-9;
        hom.push(format!("{n}: {w_poly:.3}"));
    }
    line(
        failed == 0 && results.len() == 100 && hom_ok,
        format!(
            "dense oracle: {} instances, {failed} failed, max deviation {worst:.2e}; HOM {{{}}}",
            results.len(),
            hom.join(", ")
        ),
    )
}

fn necessary_condition() -> Line {
    let mut done = 0usize;
    let mut attempt = 0usize;
    let mut failures = Vec::new();
    let mut min_margin = f64::INFINITY;
    while done < 50 && attempt < 500 {
        let mut rng = instance_rng(6, attempt);
        attempt += 1;
        let sys_modes = rng.random_range(2..=3usize);
        let aux_modes = rng.random_range(1..=2usize);
        let photons = rng.random_range(1..=3u32);
        let labels: Vec<String> = (1..=sys_modes)
            .map(|k| format!("a{k}"))
            .chain((1..=aux_modes).map(|k| format!("b{k}")))
            .collect();
        let reg = ModeRegistry::new(labels).unwrap();
        let sys: Vec<_> = reg.modes().take(sys_modes).collect();
        let auxm: Vec<_> = reg.modes().skip(sys_modes).collect();
        let states = random_orthogonal_states(&reg, &sys, photons, 2, &mut rng).unwrap();
        let aux = random_homogeneous(&reg, &auxm, 1, &mut rng).unwrap();
        let net = LinearNetwork::from_matrix(haar_unitary(reg.len(), &mut rng), &reg).unwrap();
        let c = reg.mode_at(rng.random_range(0..reg.len())).unwrap();
        let inst = DiscriminationInstance::new(states, aux, None).unwrap();
        let probe = necessary_condition_probe(&inst, &net, c).unwrap();
        let pair = &probe.pairs[0];
        if pair.u_prime_zero {
            continue;
        }
        done += 1;
        min_margin = min_margin.min(pair.v_norm - pair.sigma_min * pair.u_prime_norm);
        if !(pair.bound_ok && pair.implication_ok) {
            failures.push(attempt - 1);
        }
    }
    line(
        done == 50 && failures.is_empty(),
        format!(
            "necessary condition: {done} instances with U' != 0, min (|V| - s_min |U'|) {min_margin:.2e}, failures {failures:?}"
        ),
    )
}

fn discrimination_engine() -> Line {
    let reg = ModeRegistry::new(["a1", "a2"]).unwrap();
    let a1 = CreationPolynomial::creation(&reg, reg.mode("a1").unwrap());
    let a2 = CreationPolynomial::creation(&reg, reg.mode("a2").unwrap());
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let plus = a1.add(&a2).unwrap().scale(h);
    let minus = a1.sub(&a2).unwrap().scale(h);
    let one = CreationPolynomial::one(&reg);

    let second = CascadeStrategy::single(None, ModeRef::Label("a2".into()));
    let identity_boxes = CascadeStrategy {
        network: None,
        measure: ModeRef::Label("a1".into()),
        branches: BTreeMap::from([
            (0, Branch::Stage(Box::new(second.clone()))),
            (1, Branch::Stage(Box::new(second))),
        ]),
    };
    let mut splitter = CascadeStrategy::single(Some(hadamard(&reg).to_spec()), ModeRef::Index(0));
    splitter.branches.insert(0, Branch::Leaf("minus".into()));
    splitter.branches.insert(1, Branch::Leaf("plus".into()));
    let mut relabeled = splitter.clone();
    relabeled.branches.insert(0, Branch::Leaf("x".into()));
    relabeled.branches.insert(1, Branch::Leaf("y".into()));

    let verdict = |states: Vec<CreationPolynomial>, s: &CascadeStrategy| -> bool {
        let inst = DiscriminationInstance::new(states, one.clone(), Some(s.clone())).unwrap();
        check_cascade_discrimination(&inst).unwrap().passed()
    };
    let forward = vec![plus.clone(), minus.clone()];
    let reversed = vec![minus, plus];
    let id_fwd = verdict(forward.clone(), &identity_boxes);
    let id_rev = verdict(reversed.clone(), &identity_boxes);
    let bs_fwd = verdict(forward.clone(), &splitter);
    let bs_rev = verdict(reversed, &splitter);
    let bs_relabel = verdict(forward, &relabeled);
    let pass = !id_fwd && !id_rev && bs_fwd && bs_rev && bs_relabel;
    let word = |b: bool| if b { "PASS" } else { "FAIL" };
    line(
        pass,
        format!(
            "discrimination: identity boxes {} / {} (reordered), 50/50 splitter {} / {} (reordered) / {} (relabeled)",
            word(id_fwd),
            word(id_rev),
            word(bs_fwd),
            word(bs_rev),
            word(bs_relabel)
        ),
    )
}

fn no_aux_degeneration() -> Line {
    let cfg = SuiteConfig {
        seed: 8,
        count: 200,
        no_aux: true,
        ..Default::default()
    };
    let outcomes = match run_suite(&cfg) {
        Ok(o) => o,
        Err(e) => return line(false, format!("suite error: {e}")),
    };
    let mut worst: f64 = 0.0;
    let mut identity = true;
    for o in &outcomes {
        let n = o.report.m_prime.nrows();
        identity &= (&o.report.m_prime - DMatrix::<f64>::identity(n, n)).amax() <= 1e-10;
        for p in &o.report.pairs {
            for (v, u) in p.v.iter().zip(&p.u_prime) {
                worst = worst.max((v - u).norm());
            }
        }
    }
    line(
        identity && worst <= 1e-10,
        format!(
            "constant auxiliary state: M' = I on {} instances, max |V - U'| {worst:.2e}",
            outcomes.len()
        ),
    )
}

fn main() {
    let (c1, c2) = theorem_suite();
    let lines = [
        c1,
        c2,
        recurrence_equivalence(),
        normal_ordering(),
        oracle_equivalence(),
        necessary_condition(),
        discrimination_engine(),
        no_aux_degeneration(),
    ];
    let mut failed = 0;
    for (k, l) in lines.iter().enumerate() {
        let tag = if l.pass { "PASS" } else { "FAIL" };
        println!("criterion {} [{tag}] {}", k + 1, l.detail);
        if !l.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} of {} criteria passed", lines.len() - failed, lines.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

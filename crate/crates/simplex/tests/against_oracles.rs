use lattice_simplex::dense::solve_dense;
use lattice_simplex::{solve, solve_lexicographic, StandardFormLp, Status, Tolerances};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Brute force over all bases: the best feasible basic solution.
/// Upper bounds are turned into rows with slacks first.
fn vertex_enumeration(lp: &StandardFormLp) -> Option<f64> {
    let n0 = lp.cols;
    let bounded: Vec<usize> = (0..n0).filter(|&j| lp.upper_bound(j).is_finite()).collect();
    let m = lp.rows + bounded.len();
    let n = n0 + bounded.len();
    let mut a = vec![vec![0.0; n]; m];
    let mut b = lp.b.clone();
    for &(r, c, v) in &lp.entries {
        a[r][c] += v;
    }
    for (k, &j) in bounded.iter().enumerate() {
        a[lp.rows + k][j] = 1.0;
        a[lp.rows + k][n0 + k] = 1.0;
        b.push(lp.upper_bound(j));
    }
    let mut cost = lp.c.clone();
    cost.resize(n, 0.0);

    let mut best: Option<f64> = None;
    let mut x = vec![0.0; n];
    // Subsets of at most m columns; singular subsets are skipped.
    let mut visit = |cols: &[usize]| {
        let k = cols.len();
        // least squares via normal equations is overkill; use Gaussian
        // elimination on the m×k system and require consistency.
        let mut mat: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let mut row: Vec<f64> = cols.iter().map(|&j| a[i][j]).collect();
                row.push(b[i]);
                row
            })
            .collect();
        let mut piv_cols = Vec::new();
        let mut r = 0;
        for c in 0..k {
            let Some(p) = (r..m).max_by(|&i, &j| mat[i][c].abs().total_cmp(&mat[j][c].abs())) else { break };
            if mat[p][c].abs() < 1e-10 {
                return;
            }
            mat.swap(r, p);
            let pv = mat[r][c];
            for v in mat[r].iter_mut() {
                *v /= pv;
            }
            for i in 0..m {
                if i != r {
                    let f = mat[i][c];
                    if f != 0.0 {
                        for jj in 0..=k {
                            mat[i][jj] -= f * mat[r][jj];
                        }
                    }
                }
            }
            piv_cols.push(c);
            r += 1;
        }
        for i in r..m {
            if mat[i][k].abs() > 1e-9 {
                return;
            }
        }
        x.iter_mut().for_each(|v| *v = 0.0);
        for (row, &c) in piv_cols.iter().enumerate() {
            let v = mat[row][k];
            if v < -1e-10 {
                return;
            }
            x[cols[c]] = v.max(0.0);
        }
        let obj: f64 = x.iter().zip(&cost).map(|(x, c)| x * c).sum();
        if best.is_none_or(|b| obj < b) {
            best = Some(obj);
        }
    };
    let mut subset = Vec::new();
    fn rec(start: usize, n: usize, m: usize, subset: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        f(subset);
        if subset.len() == m {
            return;
        }
        for j in start..n {
            subset.push(j);
            rec(j + 1, n, m, subset, f);
            subset.pop();
        }
    }
    rec(0, n, m, &mut subset, &mut visit);
    best
}

/// Bounded random instance: a feasible point is planted, so the LP is
/// feasible, and either all costs are nonnegative or the box bounds it.
fn random_instance(rng: &mut ChaCha8Rng, max_rows: usize, max_cols: usize, bounded: bool) -> StandardFormLp {
    let m = rng.gen_range(1..=max_rows);
    let n = rng.gen_range(m..=max_cols.max(m));
    let mut lp = StandardFormLp::new(m, n);
    for i in 0..m {
        for j in 0..n {
            if rng.gen_bool(0.5) {
                let v: f64 = rng.gen_range(-3..=3) as f64;
                if v != 0.0 {
                    lp.push(i, j, v);
                }
            }
        }
    }
    let x0: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.6) { rng.gen_range(0..4) as f64 } else { 0.0 }).collect();
    lp.b = lp.activity(&x0);
    if bounded {
        lp.upper = Some(x0.iter().map(|v| v + rng.gen_range(1..4) as f64).collect());
        lp.c = (0..n).map(|_| rng.gen_range(-5..=5) as f64).collect();
    } else {
        lp.c = (0..n).map(|_| rng.gen_range(0..=5) as f64).collect();
    }
    lp
}

fn check_certificates(lp: &StandardFormLp, tol: f64) {
    let s = solve(lp, &Tolerances::default()).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert!(lp.primal_residual(&s.primal) <= 1e-9, "primal residual");
    let dual = lp.dual_objective(&s.duals);
    assert!((s.objective - dual).abs() <= tol * (1.0 + s.objective.abs()), "gap {} vs {}", s.objective, dual);
    for j in 0..lp.cols {
        let d = s.reduced_costs[j];
        let x = s.primal[j];
        let u = lp.upper_bound(j);
        // Complementary slackness against whichever bound is active.
        let slack_lower = x * d.max(0.0);
        let slack_upper = if u.is_finite() { (u - x) * (-d).max(0.0) } else { 0.0 };
        assert!(slack_lower <= 1e-8 && slack_upper <= 1e-8, "complementarity at {j}");
        if !u.is_finite() {
            assert!(d >= -1e-9, "dual infeasible at {j}: {d}");
        }
    }
}

#[test]
fn matches_vertex_enumeration_on_small_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut compared = 0;
    for round in 0..300 {
        let lp = random_instance(&mut rng, 4, 8, round % 2 == 0);
        let cols = lp.cols + lp.upper.as_ref().map_or(0, |u| u.iter().filter(|v| v.is_finite()).count());
        if cols > 12 {
            continue;
        }
        let s = solve(&lp, &Tolerances::default()).unwrap();
        let brute = vertex_enumeration(&lp).expect("planted point makes the LP feasible");
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective - brute).abs() <= 1e-8 * (1.0 + brute.abs()), "round {round}: {} vs {brute}", s.objective);
        compared += 1;
    }
    assert!(compared > 100);
}

#[test]
fn matches_dense_reference_up_to_thirty_columns() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for round in 0..200 {
        let lp = random_instance(&mut rng, 12, 30, round % 3 == 0);
        let s = solve(&lp, &Tolerances::default()).unwrap();
        let d = solve_dense(&lp).unwrap();
        assert_eq!(s.status, d.status, "round {round}");
        assert!((s.objective - d.objective).abs() <= 1e-8 * (1.0 + d.objective.abs()), "round {round}");
    }
}

#[test]
fn infeasible_instances_agree_and_carry_valid_rays() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut seen = 0;
    for _ in 0..300 {
        let mut lp = random_instance(&mut rng, 6, 10, false);
        // Perturb the right-hand side; many of these become infeasible.
        for b in &mut lp.b {
            *b += rng.gen_range(-3..=3) as f64;
        }
        let s = solve(&lp, &Tolerances::default()).unwrap();
        let d = solve_dense(&lp).unwrap();
        assert_eq!(s.status, d.status);
        if s.status == Status::Infeasible {
            let (margin, worst) = lp.farkas_margin(s.farkas.as_ref().unwrap());
            assert!(margin > 1e-9 && worst <= 1e-9);
            seen += 1;
        }
    }
    assert!(seen > 20);
}

#[test]
fn degenerate_transport_problems() {
    // Many ties: uniform marginals and integer costs.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..40 {
        let k = rng.gen_range(2..7);
        let mut lp = StandardFormLp::new(2 * k, k * k);
        for i in 0..k {
            for j in 0..k {
                lp.push(i, i * k + j, 1.0);
                lp.push(k + j, i * k + j, 1.0);
                lp.c[i * k + j] = rng.gen_range(0..3) as f64;
            }
            lp.b[i] = 1.0 / k as f64;
            lp.b[k + i] = 1.0 / k as f64;
        }
        check_certificates(&lp, 1e-8);
        let s = solve(&lp, &Tolerances::default()).unwrap();
        let d = solve_dense(&lp).unwrap();
        assert!((s.objective - d.objective).abs() < 1e-9);
    }
}

#[test]
fn repeated_solves_are_bit_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    for _ in 0..20 {
        let lp = random_instance(&mut rng, 10, 25, true);
        let a = solve(&lp, &Tolerances::default()).unwrap();
        let b = solve(&lp, &Tolerances::default()).unwrap();
        assert_eq!(a.status, b.status);
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        assert_eq!(a.primal, b.primal);
    }
}

#[test]
fn lexicographic_matches_two_stage_oracle() {
    // Oracle: fix c·x ≤ opt via an explicit row and slack, solve densely.
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..100 {
        let lp = random_instance(&mut rng, 5, 10, true);
        let c2: Vec<f64> = (0..lp.cols).map(|_| rng.gen_range(-4..=4) as f64).collect();
        let lex = solve_lexicographic(&lp, &c2, &Tolerances::default()).unwrap();
        let opt1 = solve_dense(&lp).unwrap().objective;
        let mut face = lp.clone();
        face.rows += 1;
        face.cols += 1;
        for (j, &c) in lp.c.iter().enumerate() {
            if c != 0.0 {
                face.entries.push((lp.rows, j, c));
            }
        }
        face.entries.push((lp.rows, lp.cols, 1.0));
        face.b.push(opt1 + 1e-9);
        face.c = c2.clone();
        face.c.push(0.0);
        let mut u = face.upper.clone().unwrap();
        u.push(f64::INFINITY);
        face.upper = Some(u);
        let oracle = solve_dense(&face).unwrap();
        assert_eq!(lex.secondary.status, oracle.status);
        assert!((lex.primary.objective - opt1).abs() < 1e-8);
        assert!(
            (lex.secondary.objective - oracle.objective).abs() < 1e-7,
            "{} vs {}",
            lex.secondary.objective,
            oracle.objective
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn strong_duality_and_complementarity(seed in any::<u64>(), bounded in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lp = random_instance(&mut rng, 10, 30, bounded);
        check_certificates(&lp, 1e-8);
    }
}

use approx::assert_abs_diff_eq;
use num_traits::ToPrimitive;
use rand::Rng;

use super::*;
use crate::kernel::Alphabet;
use crate::model::FiniteDist;
use crate::moments::realorder::sigma2_rational;
use crate::poly::big_rat;

fn opts() -> MomentOptions {
    MomentOptions::default()
}

fn uniform_binary() -> SequenceModel {
    SequenceModel::iid_uniform_binary()
}

fn e0_kernel() -> Kernel {
    let a = Alphabet::binary();
    Kernel::Linear(vec![
        (1.0, Kernel::word_from_text("101", &a).unwrap()),
        (-1.0, Kernel::word_from_text("011", &a).unwrap()),
    ])
}

fn xor_model() -> SequenceModel {
    SequenceModel::block_factor(FiniteDist::uniform(2), 2, vec![0, 1, 1, 0], 2).unwrap()
}

#[test]
fn beta_inner_matches_quadrature() {
    // psi products integrated with Simpson's rule as an independent check.
    let simpson = |g: &dyn Fn(f64) -> f64| {
        let n = 4000;
        let h = 1.0 / n as f64;
        let mut acc = g(0.0) + g(1.0);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * g(k as f64 * h);
        }
        acc * h / 3.0
    };
    assert_eq!(beta_inner(1, 1, 1), big_rat(1, 1));
    assert_eq!(beta_inner(1, 1, 2), big_rat(1, 3));
    assert_eq!(beta_inner(1, 2, 2), big_rat(1, 6));
    for ell in 1..=4usize {
        for i in 1..=ell {
            for j in 1..=ell {
                let pi = psi_poly(i, ell);
                let pj = psi_poly(j, ell);
                let approx = simpson(&|t| pi.eval_f64(t) * pj.eval_f64(t));
                let exact = beta_inner(i, j, ell).to_f64().unwrap();
                assert_abs_diff_eq!(exact, approx, epsilon = 1e-10);
                // The factorial formula agrees with the exact polynomial
                // integral as well.
                let poly = pi.mul(&pj).integral01();
                assert_eq!(poly, beta_inner(i, j, ell));
            }
        }
    }
}

#[test]
fn mu_examples() {
    let o = opts();
    let a = Alphabet::binary();
    let w01 = Kernel::word_from_text("01", &a).unwrap();
    assert_abs_diff_eq!(
        mu(&w01, &uniform_binary(), &o).unwrap().value,
        0.25,
        epsilon = 0.0
    );
    assert_eq!(mu(&e0_kernel(), &uniform_binary(), &o).unwrap().value, 0.0);
    let tau = Kernel::perm_pattern(vec![2, 3, 1]).unwrap();
    assert_abs_diff_eq!(
        mu(&tau, &SequenceModel::IidUniform01, &o).unwrap().value,
        1.0 / 6.0,
        epsilon = 1e-15
    );
}

#[test]
fn mu_exactly_constrained_examples() {
    let o = opts();
    let a = Alphabet::binary();
    // Independent model: equals mu regardless of the constraint.
    let w11 = Kernel::word_from_text("11", &a).unwrap();
    let d = Constraint::parse("2").unwrap();
    let v = mu_exactly_constrained(&w11, &d, &uniform_binary(), &o).unwrap();
    assert_abs_diff_eq!(v.value, 0.25, epsilon = 0.0);

    // Block-factor model: check against a brute-force average over the
    // enumerated base letters with well-separated blocks.
    let model = xor_model();
    let f = Kernel::word_from_text("11", &a).unwrap();
    let d = Constraint::parse("2").unwrap();
    let got = mu_exactly_constrained(&f, &d, &model, &o).unwrap().value;
    // Blocks are a single run here, so the mean is E f(X_1, X_3) under the
    // process law; enumerate base strings of length 4.
    let mut brute = 0.0;
    for (string, p) in model.enumerate_strings(3, 1 << 20).unwrap() {
        brute += p * f.eval_sym(&[string[0], string[2]]);
    }
    assert_abs_diff_eq!(got, brute, epsilon = 1e-12);

    // Two blocks with dependence: E f(X_1, X_2, X_j, X_{j+2}) for large j.
    let f2 = Kernel::word_from_text("1111", &a).unwrap();
    let d2 = Constraint::parse("1,inf,2").unwrap();
    let got = mu_exactly_constrained(&f2, &d2, &model, &o).unwrap().value;
    let mut brute = 0.0;
    // Blocks (X_1, X_2) and (X_10, X_12) are independent for a 1-dependent
    // sequence; enumerate each block's law separately.
    let mut first = 0.0;
    let mut second = 0.0;
    for (s, p) in model.enumerate_strings(2, 1 << 20).unwrap() {
        if s[0] == 1 && s[1] == 1 {
            first += p;
        }
    }
    for (s, p) in model.enumerate_strings(3, 1 << 20).unwrap() {
        if s[0] == 1 && s[2] == 1 {
            second += p;
        }
    }
    brute += first * second;
    assert_abs_diff_eq!(got, brute, epsilon = 1e-12);
}

#[test]
fn mu_constrained_examples() {
    let o = opts();
    let a = Alphabet::binary();
    let w101 = Kernel::word_from_text("101", &a).unwrap();
    let d = Constraint::parse("1,inf").unwrap();
    assert_abs_diff_eq!(
        mu_constrained(&w101, &d, &uniform_binary(), &o).unwrap().value,
        0.125,
        epsilon = 0.0
    );
    let inv = Kernel::perm_pattern(vec![2, 1]).unwrap();
    for d_gap in [1usize, 3, 7] {
        let d = Constraint::parse(&d_gap.to_string()).unwrap();
        assert_abs_diff_eq!(
            mu_constrained(&inv, &d, &SequenceModel::IidUniform01, &o)
                .unwrap()
                .value,
            d_gap as f64 / 2.0,
            epsilon = 1e-12
        );
    }
    let d = Constraint::unconstrained(3);
    let w = Kernel::word_from_text("111", &a).unwrap();
    assert_abs_diff_eq!(
        mu_constrained(&w, &d, &uniform_binary(), &o).unwrap().value,
        mu(&w, &uniform_binary(), &o).unwrap().value,
        epsilon = 0.0
    );
}

#[test]
fn expected_un_examples() {
    let o = opts();
    let a = Alphabet::binary();
    let w01 = Kernel::word_from_text("01", &a).unwrap();
    let e = expected_un(&w01, Target::Unconstrained, 10, &uniform_binary(), &o).unwrap();
    assert!(e.exact);
    assert_abs_diff_eq!(e.value, 11.25, epsilon = 0.0);

    let e = expected_un(&w01, Target::Unconstrained, 1, &uniform_binary(), &o).unwrap();
    assert_eq!(e.value, 0.0);

    let d = Constraint::parse("2").unwrap();
    let w11 = Kernel::word_from_text("11", &a).unwrap();
    let e = expected_un(
        &w11,
        Target::Constrained(&d, Mode::Exact),
        5,
        &uniform_binary(),
        &o,
    )
    .unwrap();
    // C(5-2, 1) * mu = 3 * 1/4.
    assert_abs_diff_eq!(e.value, 0.75, epsilon = 0.0);

    // m-dependent model: leading term only, with the error order reported.
    let e = expected_un(
        &w11,
        Target::Constrained(&d, Mode::Exact),
        100,
        &xor_model(),
        &o,
    )
    .unwrap();
    assert!(!e.exact);
    assert_eq!(e.error_order, Some(0));
}

#[test]
fn expected_un_matches_exhaustive_average() {
    // Enumerate all 2^10 binary strings: the mean count of "01" must equal
    // the closed form C(10,2)/4 exactly.
    let a = Alphabet::binary();
    let w01 = Kernel::word_from_text("01", &a).unwrap();
    let model = uniform_binary();
    let eopts = crate::eval::EvalOptions::default();
    let mut total = 0i64;
    for (string, _) in model.enumerate_strings(10, 1 << 20).unwrap() {
        let xs = crate::seq::ObsSeq::from_symbols(string, 2).unwrap();
        match crate::eval::u_stat(&w01, &xs, &eopts).unwrap() {
            crate::eval::Value::Int(v) => total += v as i64,
            other => panic!("expected integer count, got {other:?}"),
        }
    }
    let mean = total as f64 / 1024.0;
    assert_abs_diff_eq!(mean, 11.25, epsilon = 0.0);
    let e = expected_un(&w01, Target::Unconstrained, 10, &model, &opts()).unwrap();
    assert_abs_diff_eq!(e.value, mean, epsilon = 0.0);
}

#[test]
fn projection_examples() {
    let o = opts();
    // Pattern slot polynomial: f_1 for tau = (2,1).
    let inv = Kernel::perm_pattern(vec![2, 1]).unwrap();
    let proj = projections(&inv, &SequenceModel::IidUniform01, &o).unwrap();
    let ProjectionTable::Polynomial { polys, .. } = &proj else {
        panic!("expected polynomials");
    };
    // f_1(x) = x - 1/2, f_2(x) = 1/2 - x.
    assert_abs_diff_eq!(polys[0].eval_f64(0.3), -0.2, epsilon = 1e-15);
    assert_abs_diff_eq!(polys[1].eval_f64(0.3), 0.2, epsilon = 1e-15);
    assert!(proj.centering_error() < 1e-15);

    // Constant kernel: all projections vanish.
    let c = Kernel::table(2, 2, vec![0.75; 4]).unwrap();
    let proj = projections(&c, &uniform_binary(), &o).unwrap();
    let ProjectionTable::Finite { tables, .. } = &proj else {
        panic!("expected tables");
    };
    for t in tables {
        for &v in t {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-15);
        }
    }

    // General pattern slot: tau_1 = 2 within length 3.
    let tau = Kernel::perm_pattern(vec![2, 3, 1]).unwrap();
    let proj = projections(&tau, &SequenceModel::IidUniform01, &o).unwrap();
    let ProjectionTable::Polynomial { polys, .. } = &proj else {
        panic!("expected polynomials");
    };
    let x: f64 = 0.4;
    assert_abs_diff_eq!(
        polys[0].eval_f64(x),
        x * (1.0 - x) - 1.0 / 6.0,
        epsilon = 1e-15
    );
}

#[test]
fn reduced_projection_examples() {
    let o = opts();
    let d = Constraint::parse("1,inf").unwrap();
    let proj =
        reduced_projections(&e0_kernel(), &d, Mode::Bounded, &uniform_binary(), &o).unwrap();
    let ProjectionTable::Finite {
        tables,
        window,
        alphabet_size,
        ..
    } = &proj
    else {
        panic!("expected tables");
    };
    assert_eq!(*window, 2);
    assert_eq!(*alphabet_size, 2);
    // g_1(x, y) = (x - y)/2 on window codes (00, 01, 10, 11).
    let expect = [0.0, -0.5, 0.5, 0.0];
    for (code, &e) in expect.iter().enumerate() {
        assert_abs_diff_eq!(tables[0][code], e, epsilon = 1e-15);
        assert_abs_diff_eq!(tables[1][code], 0.0, epsilon = 1e-15);
    }
    assert!(proj.centering_error() < 1e-15);

    // Fully unbounded constraint reduces to the plain projections.
    let a = Alphabet::binary();
    let w = Kernel::word_from_text("10", &a).unwrap();
    let d = Constraint::unconstrained(2);
    let p1 = reduced_projections(&w, &d, Mode::Bounded, &uniform_binary(), &o).unwrap();
    let p2 = projections(&w, &uniform_binary(), &o).unwrap();
    let (ProjectionTable::Finite { tables: t1, .. }, ProjectionTable::Finite { tables: t2, .. }) =
        (&p1, &p2)
    else {
        panic!("expected tables");
    };
    assert_eq!(t1, t2);
}

#[test]
fn gamma_examples() {
    let o = opts();
    let inv = Kernel::perm_pattern(vec![2, 1]).unwrap();
    let proj = projections(&inv, &SequenceModel::IidUniform01, &o).unwrap();
    let gamma = gamma_array(&proj, &SequenceModel::IidUniform01, 0, &o).unwrap();
    assert_abs_diff_eq!(gamma.get(0, 0, 0), 1.0 / 12.0, epsilon = 1e-15);
    assert_abs_diff_eq!(gamma.get(1, 1, 0), 1.0 / 12.0, epsilon = 1e-15);
    assert_abs_diff_eq!(gamma.get(0, 1, 0), -1.0 / 12.0, epsilon = 1e-15);

    let c = Kernel::table(2, 2, vec![0.75; 4]).unwrap();
    let proj = projections(&c, &uniform_binary(), &o).unwrap();
    let gamma = gamma_array(&proj, &uniform_binary(), 0, &o).unwrap();
    assert!(gamma.values.iter().all(|&v| v.abs() < 1e-15));
}

#[test]
fn gamma_symmetry_on_random_kernels() {
    let mut rng = crate::model::stream_rng(21, 7, 0);
    let o = opts();
    let model = xor_model();
    for _ in 0..20 {
        let values: Vec<f64> = (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let f = Kernel::table(2, 3, values).unwrap();
        let proj = projections(&f, &model, &o).unwrap();
        let gamma = gamma_array(&proj, &model, model.dependence(), &o).unwrap();
        assert!(gamma.symmetry_error() < 1e-12);
        // The summed-covariance matrix is positive semidefinite.
        let b = gamma.b_matrix();
        let min = crate::linalg::min_symmetric_eigenvalue(&super::symmetrized(&b, 3), 3);
        assert!(min > -1e-10, "min eigenvalue {min}");
    }
}

#[test]
fn variance_bridge_matches_enumeration() {
    // Cov(S_in, S_jn) from the lag covariances must equal the brute-force
    // covariance of the projection sums, exactly, on a dependent model.
    let o = opts();
    let model = xor_model();
    let mut rng = crate::model::stream_rng(22, 7, 0);
    let values: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let f = Kernel::table(2, 3, values).unwrap();
    let proj = projections(&f, &model, &o).unwrap();
    let m = model.dependence();
    let gamma = gamma_array(&proj, &model, m, &o).unwrap();
    let ProjectionTable::Finite { tables, .. } = &proj else {
        panic!("expected tables");
    };
    for n in [3usize, 7, 12] {
        // Brute force over every realization of the model.
        let strings = model.enumerate_strings(n, 1 << 24).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let (mut ei, mut ej, mut eij) = (0.0, 0.0, 0.0);
                for (s, p) in &strings {
                    let si: f64 = s.iter().map(|&x| tables[i][x as usize]).sum();
                    let sj: f64 = s.iter().map(|&x| tables[j][x as usize]).sum();
                    ei += p * si;
                    ej += p * sj;
                    eij += p * si * sj;
                }
                let brute = eij - ei * ej;
                let formula: f64 = (-(m as isize)..=(m as isize))
                    .map(|r| (n as f64 - r.unsigned_abs() as f64) * gamma.get(i, j, r))
                    .sum();
                assert_abs_diff_eq!(brute, formula, epsilon = 1e-10);
            }
        }
    }
}

#[test]
fn sigma2_inversions_is_one_thirty_sixth() {
    let o = opts();
    let inv = Kernel::perm_pattern(vec![2, 1]).unwrap();
    let report = sigma2(&inv, Target::Unconstrained, &SequenceModel::IidUniform01, &o).unwrap();
    assert!(report.exact);
    assert_abs_diff_eq!(report.sigma2, 1.0 / 36.0, epsilon = 1e-12);
    assert_eq!(report.verdict, Verdict::NonDegenerate);
    assert_eq!(sigma2_rational(&inv).unwrap(), big_rat(1, 36));
}

#[test]
fn sigma2_degenerate_example_vanishes() {
    let o = opts();
    let d = Constraint::parse("1,inf").unwrap();
    let report = sigma2(
        &e0_kernel(),
        Target::Constrained(&d, Mode::Bounded),
        &uniform_binary(),
        &o,
    )
    .unwrap();
    assert!(report.exact);
    assert_eq!(report.sigma2, 0.0);
    assert!(report.b_matrix_max_abs < 1e-12);
    assert_eq!(report.verdict, Verdict::Degenerate);
    assert_eq!(report.m_eff, 1);
    assert_eq!(report.slots, 2);
}

#[test]
fn sigma2_arity_one_is_marginal_variance() {
    let o = opts();
    // f = indicator of letter 1 under biased coin: Var = p(1-p).
    let model = SequenceModel::IidFinite {
        dist: FiniteDist::new(vec![0.7, 0.3]).unwrap(),
    };
    let f = Kernel::table(2, 1, vec![0.0, 1.0]).unwrap();
    let report = sigma2(&f, Target::Unconstrained, &model, &o).unwrap();
    assert_abs_diff_eq!(report.sigma2, 0.3 * 0.7, epsilon = 1e-15);
}

#[test]
fn degeneracy_verdicts() {
    let o = opts();
    let a = Alphabet::binary();
    let w = Kernel::word_from_text("101", &a).unwrap();
    let report = sigma2(&w, Target::Unconstrained, &uniform_binary(), &o).unwrap();
    assert_eq!(report.verdict, Verdict::NonDegenerate);
    assert!(report.sigma2 > 0.0);

    let tau = Kernel::perm_pattern(vec![1, 3, 2]).unwrap();
    let report = sigma2(&tau, Target::Unconstrained, &SequenceModel::IidUniform01, &o).unwrap();
    assert_eq!(report.verdict, Verdict::NonDegenerate);
    assert!(report.sigma2 > 0.0);

    // Verdict coherence: sigma2 <= tol iff degenerate, on assorted kernels.
    let mut rng = crate::model::stream_rng(23, 7, 0);
    for _ in 0..30 {
        let values: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = Kernel::table(2, 2, values).unwrap();
        let report = sigma2(&f, Target::Unconstrained, &uniform_binary(), &o).unwrap();
        let degenerate = report.sigma2 <= o.degeneracy_tolerance;
        assert_eq!(
            degeneracy_test(&report, o.degeneracy_tolerance) == Verdict::Degenerate,
            degenerate
        );
    }
}

#[test]
fn sigma2_consistency_with_exact_finite_n_variance() {
    // Fit the exact Var U_n (a polynomial in n of degree 2l-1) over a short
    // n-range and compare the leading coefficient against sigma2.
    let o = opts();
    let mut rng = crate::model::stream_rng(24, 7, 0);
    let model = uniform_binary();
    let eopts = crate::eval::EvalOptions::default();
    for _ in 0..3 {
        let values: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = Kernel::table(2, 2, values).unwrap();
        let report = sigma2(&f, Target::Unconstrained, &model, &o).unwrap();
        let ns: Vec<usize> = (8..=14).collect();
        let vars: Vec<f64> = ns
            .iter()
            .map(|&n| {
                let mut e = 0.0;
                let mut e2 = 0.0;
                for (s, p) in model.enumerate_strings(n, 1 << 24).unwrap() {
                    let xs = crate::seq::ObsSeq::from_symbols(s, 2).unwrap();
                    let u = crate::eval::u_stat(&f, &xs, &eopts).unwrap().as_f64();
                    e += p * u;
                    e2 += p * u * u;
                }
                e2 - e * e
            })
            .collect();
        // Solve the degree-3 polynomial through four of the points and read
        // off the cubic coefficient; remaining points must agree too.
        let lead = poly_leading_coeff(&ns, &vars, 3);
        if report.sigma2 > 1e-12 {
            let rel = (lead - report.sigma2).abs() / report.sigma2;
            assert!(rel < 0.05, "leading {lead} vs sigma2 {}", report.sigma2);
        } else {
            assert!(lead.abs() < 1e-9);
        }
    }
}

/// Leading coefficient of the degree-`deg` polynomial through the points
/// `(ns[i], vals[i])`, via divided differences on the first `deg+1` points.
fn poly_leading_coeff(ns: &[usize], vals: &[f64], deg: usize) -> f64 {
    let xs: Vec<f64> = ns.iter().take(deg + 1).map(|&n| n as f64).collect();
    let mut table: Vec<f64> = vals.iter().take(deg + 1).copied().collect();
    for level in 1..=deg {
        for k in (level..=deg).rev() {
            table[k] = (table[k] - table[k - 1]) / (xs[k] - xs[k - level]);
        }
    }
    table[deg]
}

#[test]
fn var_z_examples() {
    assert_eq!(var_z(1.0, 0.25, 2), 0.25);
    assert_eq!(var_z(0.0, 0.25, 2), 0.0);
    assert_eq!(var_z(2.0, 0.25, 1), 0.5);
}

#[test]
fn mc_constrained_sigma2_matches_descent_variance() {
    // Adjacent descents: b = 1, sigma^2 = 1/12 (classical). The MC path is
    // the only route for constrained order kernels.
    let mut o = opts();
    o.mc_outer = 40_000;
    let inv = Kernel::perm_pattern(vec![2, 1]).unwrap();
    let d = Constraint::parse("1").unwrap();
    let report = sigma2(
        &inv,
        Target::Constrained(&d, Mode::Bounded),
        &SequenceModel::IidUniform01,
        &o,
    )
    .unwrap();
    assert!(!report.exact);
    let se = report.sigma2_se.unwrap();
    assert!(
        (report.sigma2 - 1.0 / 12.0).abs() < 4.0 * se,
        "sigma2 {} +- {se}",
        report.sigma2
    );
    assert_eq!(report.verdict, Verdict::NonDegenerate);
}

#[test]
fn mc_reduced_projections_match_descent_projection() {
    // For b = 1 the reduced projection is g(y) - mu: here
    // 1{y_1 > y_2} - 1/2 at each sampled point.
    let o = opts();
    let inv = Kernel::perm_pattern(vec![2, 1]).unwrap();
    let d = Constraint::parse("1").unwrap();
    let proj = reduced_projections(&inv, &d, Mode::Bounded, &SequenceModel::IidUniform01, &o)
        .unwrap();
    let ProjectionTable::McPoints {
        points,
        values,
        window,
        ..
    } = &proj
    else {
        panic!("expected MC projections");
    };
    assert_eq!(*window, 2);
    for (point, &v) in points.iter().zip(&values[0]) {
        let expect = if point[0] > point[1] { 0.5 } else { -0.5 };
        assert_abs_diff_eq!(v, expect, epsilon = 1e-12);
    }
}

#[test]
fn mu_mc_agrees_with_exact() {
    let mut o = opts();
    o.mc_outer = 20_000;
    let a = Alphabet::binary();
    let f = Kernel::word_from_text("11", &a).unwrap();
    let est = super::mc::mu_mc(&f, &uniform_binary(), &o).unwrap();
    let se = est.se.unwrap();
    assert!((est.value - 0.25).abs() < 4.0 * se);
}

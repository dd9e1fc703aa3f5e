use fracspde::noise::*;
use proptest::prelude::*;

/// Covariance of two fBm increments over `(a0, a1]` and `(b0, b1]`.
fn incr_cov(h: f64, a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    let p = |x: f64| x.abs().powf(2.0 * h);
    0.5 * (p(a1 - b0) + p(a0 - b1) - p(a1 - b1) - p(a0 - b0))
}

/// `Vᵀ C_f V` assembled entry by entry.
fn dense_q(h1: f64, n: usize, nf: usize) -> Vec<Vec<f64>> {
    let hf = 1.0 / nf as f64;
    let phi = |k: usize, c: usize| {
        let x = (c as f64 + 0.5) * hf;
        2f64.sqrt() * (k as f64 * std::f64::consts::PI * x).sin()
    };
    let mut q = vec![vec![0.0; n]; n];
    for a in 0..nf {
        for b in 0..nf {
            let c = incr_cov(
                h1,
                a as f64 * hf,
                (a + 1) as f64 * hf,
                b as f64 * hf,
                (b + 1) as f64 * hf,
            );
            for j in 0..n {
                for k in 0..n {
                    q[j][k] += phi(j + 1, a) * c * phi(k + 1, b);
                }
            }
        }
    }
    q
}

#[test]
fn time_covariance_matches_polarization() {
    let (m, t) = (12, 0.3);
    let tau = t / m as f64;
    let c = time_increment_cov(0.3, m, t).unwrap().matrix();
    for i in 0..m {
        for j in 0..m {
            let want = incr_cov(
                0.3,
                i as f64 * tau,
                (i + 1) as f64 * tau,
                j as f64 * tau,
                (j + 1) as f64 * tau,
            );
            assert!((c[(i, j)] - want).abs() < 1e-14, "({i},{j})");
        }
        assert!((c[(i, i)] - tau.powf(0.6)).abs() < 1e-14);
    }
}

#[test]
fn adjacent_increments_anticorrelated() {
    // unit step: T = M
    let c = time_increment_cov(0.3, 4, 4.0).unwrap().matrix();
    let want = 0.5 * (2f64.powf(0.6) - 2.0);
    assert!((c[(0, 1)] - want).abs() < 1e-14);
    assert!((want + 0.2421).abs() < 1e-4);
}

#[test]
fn white_time_covariance_is_scaled_identity() {
    let c = time_increment_cov(0.5, 10, 0.5).unwrap();
    assert!(c.is_diagonal());
    let mat = c.matrix();
    for i in 0..10 {
        for j in 0..10 {
            assert_eq!(mat[(i, j)], if i == j { 0.05 } else { 0.0 });
        }
    }
}

#[test]
fn spatial_projection_matches_dense_assembly() {
    for h1 in [0.2, 0.35, 0.5] {
        let q = spatial_proj_cov(h1, 3, 256).unwrap();
        let want = dense_q(h1, 3, 256);
        for j in 0..3 {
            for k in 0..3 {
                assert!(
                    (q.matrix[(j, k)] - want[j][k]).abs() < 1e-12,
                    "h1={h1} ({j},{k})"
                );
            }
        }
    }
}

#[test]
fn white_space_projection_is_identity() {
    let q = spatial_proj_cov(0.5, 8, 4096).unwrap();
    for j in 0..8 {
        for k in 0..8 {
            let want = if j == k { 1.0 } else { 0.0 };
            assert!((q.matrix[(j, k)] - want).abs() < 2e-3);
        }
    }
    assert_eq!(q.matrix, q.matrix.transpose());
}

#[test]
fn fine_grid_refinement_converges() {
    let v: Vec<f64> = [1 << 10, 1 << 12, 1 << 14]
        .iter()
        .map(|&nf| spatial_proj_cov(0.25, 1, nf).unwrap().matrix[(0, 0)])
        .collect();
    let (d1, d2) = ((v[1] - v[0]).abs(), (v[2] - v[1]).abs());
    assert!(d2 < d1, "{v:?}");
    // second-order midpoint error: each refinement by 4 cuts the gap
    assert!(d2 < 0.25 * d1, "{v:?}");
    let richardson = v[2] + (v[2] - v[1]) / 15.0;
    assert!((v[2] - richardson).abs() < 1e-4, "{v:?}");
}

#[test]
fn resolution_guard() {
    assert!(matches!(
        spatial_proj_cov(0.3, 100, 4096),
        Err(fracspde::Error::Config(_))
    ));
    assert_eq!(fine_grid_for(8), 4096);
    assert_eq!(fine_grid_for(128), 8192);
}

#[test]
fn zero_spatial_factor_gives_zero_noise() {
    let mut q = spatial_proj_cov(0.3, 4, 4096).unwrap();
    q.chol.fill(0.0);
    let c = time_increment_cov(0.3, 8, 1.0).unwrap();
    let x = sample_noise(&q, &c, &mut path_rng(1, 0));
    assert!(x.as_slice().iter().all(|&v| v == 0.0));
}

#[test]
fn white_noise_variance_band() {
    let model = NoiseModel::new(HurstPair::new(0.5, 0.5).unwrap(), 2, 8, 0.8, 3).unwrap();
    let tau = 0.1;
    let n = 10_000;
    let var = (0..n)
        .map(|i| model.sample(i).get(0, 0).powi(2))
        .sum::<f64>()
        / n as f64;
    let q11 = model.spatial.matrix[(0, 0)];
    assert!((var / (q11 * tau) - 1.0).abs() < 0.06, "{var}");
}

#[test]
fn cumulative_sums_behave_like_fbm() {
    let (h2, m, t) = (0.3, 8, 1.0);
    let model = NoiseModel::new(HurstPair::new(0.4, h2).unwrap(), 2, m, t, 5).unwrap();
    let n = 10_000;
    let qkk = model.spatial.matrix[(0, 0)];
    let mut acc = vec![Vec::with_capacity(n); m];
    for p in 0..n {
        let s = model.sample(p as u64);
        let mut cum = 0.0;
        for (i, a) in acc.iter_mut().enumerate() {
            cum += s.get(0, i) / qkk.sqrt();
            a.push(cum * cum);
        }
    }
    for (i, a) in acc.iter().enumerate() {
        let ti = (i + 1) as f64 * t / m as f64;
        let mean = a.iter().sum::<f64>() / n as f64;
        let sd = (a.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let se = sd / (n as f64).sqrt();
        let want = ti.powf(2.0 * h2);
        assert!(
            (mean - want).abs() < 3.0 * se,
            "i={i}: {mean} vs {want} (se {se})"
        );
    }
}

#[test]
fn paths_are_reproducible_and_distinct() {
    let model = NoiseModel::new(HurstPair::new(0.3, 0.4).unwrap(), 4, 8, 0.1, 77).unwrap();
    assert_eq!(model.sample(3).as_slice(), model.sample(3).as_slice());
    assert_ne!(model.sample(3).as_slice(), model.sample(4).as_slice());
}

fn sample_strategy() -> impl Strategy<Value = NoiseSample> {
    (1usize..6, 1usize..5, 0u64..1000).prop_map(|(n, log_m, seed)| {
        let m = 1 << log_m;
        NoiseModel::new(HurstPair::new(0.3, 0.35).unwrap(), n, m, 0.2, seed)
            .unwrap()
            .sample(seed % 7)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn coarsening_preserves_row_sums(s in sample_strategy(), pick in 0usize..8) {
        let divisors: Vec<usize> = (1..=s.steps()).filter(|d| s.steps() % d == 0).collect();
        let f = divisors[pick % divisors.len()];
        let c = coarsen_time(&s, f).unwrap();
        prop_assert_eq!(c.steps(), s.steps() / f);
        for k in 0..s.n_modes() {
            let a: f64 = s.row(k).iter().sum();
            let b: f64 = c.row(k).iter().sum();
            prop_assert!((a - b).abs() < 1e-12);
            for i in 0..c.steps() {
                let hand: f64 = s.row(k)[i * f..(i + 1) * f].iter().sum();
                prop_assert_eq!(c.get(k, i), hand);
            }
        }
        let same = coarsen_time(&s, 1).unwrap();
        prop_assert_eq!(same.as_slice(), s.as_slice());
    }

    #[test]
    fn truncation_keeps_leading_rows(s in sample_strategy(), keep in 1usize..6) {
        let keep = keep.min(s.n_modes());
        let t = truncate_modes(&s, keep).unwrap();
        for k in 0..keep {
            prop_assert_eq!(t.row(k), s.row(k));
        }
        prop_assert!(truncate_modes(&s, 0).is_err());
        prop_assert!(truncate_modes(&s, s.n_modes() + 1).is_err());
    }

    #[test]
    fn binary_dump_round_trips(s in sample_strategy()) {
        let mut buf = Vec::new();
        s.write_binary(&mut buf).unwrap();
        prop_assert_eq!(buf.len(), 48 + 8 * s.n_modes() * s.steps());
        let back = NoiseSample::read_binary(&buf[..]).unwrap();
        prop_assert_eq!(back.as_slice(), s.as_slice());
        prop_assert_eq!(back.seed, s.seed);
        prop_assert_eq!(back.tau(), s.tau());
    }

    #[test]
    fn spatial_covariance_is_symmetric_psd(h1 in 0.05f64..=0.5, n in 1usize..6) {
        let q = spatial_proj_cov(h1, n, fine_grid_for(n)).unwrap();
        let qt = q.matrix.transpose();
        prop_assert_eq!(&q.matrix, &qt);
        let eig = q.matrix.clone().symmetric_eigenvalues();
        prop_assert!(eig.iter().all(|&e| e > -1e-12));
    }
}

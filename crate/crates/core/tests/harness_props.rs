use driftbwk::harness::csv_out::{header, render_csv};
use driftbwk::harness::{fit_scaling, sweep, Aggregate, CsvTable, RunConfig, ScalingModel};
use driftbwk::policies::{PolicyConfig, PolicyId};

fn config(
    instance: &str,
    id: PolicyId,
    horizons: Vec<u64>,
    seeds: std::ops::Range<u64>,
) -> RunConfig {
    let mut policy = PolicyConfig::new(id);
    policy.c = Some(30.0);
    RunConfig {
        instance: instance.into(),
        policy,
        horizons,
        seeds: seeds.collect(),
        master_seed: 0,
        out: None,
        jobs: None,
        trajectory_stride: None,
    }
}

fn mean_se(a: &Aggregate, col: usize) -> (f64, f64) {
    (a.mean[col].unwrap(), a.stderr[col].unwrap())
}

fn csv(cfg: &RunConfig) -> String {
    let res = sweep(cfg).unwrap();
    render_csv(&CsvTable {
        rows: &res.rows,
        aggregates: &res.aggregates,
    })
}

#[test]
fn parallel_and_sequential_sweeps_agree() {
    let mut cfg = config("FIX-D", PolicyId::Cb, vec![3000, 6000], 0..12);
    let parallel = csv(&cfg);
    cfg.jobs = Some(1);
    assert_eq!(parallel, csv(&cfg));
    cfg.jobs = Some(3);
    assert_eq!(parallel, csv(&cfg));
    cfg.master_seed = 1;
    assert_ne!(parallel, csv(&cfg));
}

#[test]
fn csv_layout() {
    let text = csv(&config("FIX-D", PolicyId::Cb, vec![2000, 4000], 0..3));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], header(2));
    assert_eq!(lines[0].split(',').count(), 11 + 2);
    assert_eq!(lines.len(), 1 + 6 + 4);
    assert!(lines[1].starts_with("FIX-D,cb,2000,0,"));
    assert!(lines[7].starts_with("FIX-D,cb,2000,mean,"));
    assert!(lines[8].starts_with("FIX-D,cb,2000,stderr,"));
    assert!(lines.iter().all(|l| l.split(',').count() == 13));
}

#[test]
fn mean_regret_is_nonnegative() {
    for (name, id) in [
        ("FIX-A", PolicyId::Cb1),
        ("FIX-B", PolicyId::Cb1),
        ("FIX-D", PolicyId::Cb),
        ("FIX-B", PolicyId::LpSampler),
    ] {
        let res = sweep(&config(name, id, vec![10_000], 0..100)).unwrap();
        let (m, se) = mean_se(&res.aggregates[0], 2);
        assert!(m >= -2.0 * se, "{name} {}: {m} ± {se}", id.as_str());
    }
}

#[test]
fn binding_leftovers_and_null_pulls_stay_bounded() {
    // Leftover budget of binding resources, and null pulls when the null arm
    // is outside the optimal support, do not grow with the horizon. With the
    // null arm in the support (FIX-B, FIX-C) its pulls grow like T · p*₀.
    let checks: [(&str, PolicyId, &[usize]); 3] = [
        ("FIX-B", PolicyId::Cb1, &[4]),
        ("FIX-C", PolicyId::Cb, &[4]),
        ("FIX-D", PolicyId::Cb, &[5, 3]),
    ];
    for (name, id, cols) in checks {
        let a = sweep(&config(name, id, vec![12_500], 0..400)).unwrap();
        let b = sweep(&config(name, id, vec![25_000], 400..800)).unwrap();
        for &col in cols {
            let (ma, sa) = mean_se(&a.aggregates[0], col);
            let (mb, sb) = mean_se(&b.aggregates[0], col);
            let se = (sa * sa + sb * sb).sqrt();
            let diff = (mb - ma).abs();
            assert!(
                diff == 0.0 || diff < 2.0 * se,
                "{name} column {col}: {ma} -> {mb} (se {se})"
            );
        }
    }
}

#[test]
fn zero_drift_regret_scales_like_sqrt_t() {
    let res = sweep(&config(
        "FIX-Z",
        PolicyId::LpSampler,
        vec![1000, 4000, 16_000, 64_000],
        0..60,
    ))
    .unwrap();
    let points: Vec<(f64, f64)> = res
        .aggregates
        .iter()
        .map(|a| (a.horizon as f64, a.mean[2].unwrap()))
        .collect();
    let fit = fit_scaling(&points, ScalingModel::PowerLaw).unwrap();
    assert!((fit.coefficient - 0.5).abs() < 0.1, "{fit:?}");
    let log = fit_scaling(&points, ScalingModel::LogT).unwrap();
    let sqrt = fit_scaling(&points, ScalingModel::SqrtT).unwrap();
    assert!(sqrt.residual_ss < log.residual_ss);
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    let cfg = config("FIX-A", PolicyId::Cb1, vec![500], 0..2);
    std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let loaded = RunConfig::load(&path).unwrap();
    assert_eq!(loaded, cfg);
    let mut bad = cfg.clone();
    bad.seeds = vec![1, 1];
    assert!(sweep(&bad).is_err());
}

#[test]
fn invalid_horizon_is_a_cell_failure() {
    let res = sweep(&config("FIX-B", PolicyId::Cb1, vec![100, 2000], 0..2)).unwrap();
    assert_eq!(res.failures.len(), 1);
    assert_eq!(res.failures[0].horizon, 100);
    assert_eq!(res.rows.len(), 2);
}

#[test]
fn etcb_empirical_regret_is_increasing_and_concave() {
    let mut cfg = config(
        "FIX-E",
        PolicyId::EtcbEmpirical,
        vec![18_750, 37_500, 75_000, 150_000],
        0..50,
    );
    cfg.policy.c = None;
    cfg.policy.gamma_star = Some(0.5);
    let res = sweep(&cfg).unwrap();
    let pts: Vec<(f64, f64, f64)> = res
        .aggregates
        .iter()
        .map(|a| {
            let (m, se) = mean_se(a, 2);
            (a.horizon as f64, m, se)
        })
        .collect();
    for w in pts.windows(2) {
        assert!(w[1].1 > w[0].1, "{pts:?}");
    }
    // Concavity on an uneven grid: consecutive slopes do not increase beyond
    // two standard errors of their difference.
    for w in pts.windows(3) {
        let (h1, h2) = (w[1].0 - w[0].0, w[2].0 - w[1].0);
        let change = (w[2].1 - w[1].1) / h2 - (w[1].1 - w[0].1) / h1;
        let var = (w[0].2 / h1).powi(2)
            + (w[1].2 * (1.0 / h1 + 1.0 / h2)).powi(2)
            + (w[2].2 / h2).powi(2);
        assert!(change <= 2.0 * var.sqrt(), "{pts:?}");
    }
}

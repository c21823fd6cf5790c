use disruptr::cd_engine::{CdRecord, Counts};
use disruptr::corpus::{build_families, Anchor, PatentRow, Source};
use disruptr::regress::{
    baseline_mean, build_stacked, cluster_vcov, fit_hdfe, fit_stacked, Absorber, ClusterDim, Model,
    RegressSpec, SmallSample, StackedRow, StackedTable,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::{absorbed, brute_two_way, dummy_ols, instance};

#[test]
fn absorbed_fit_matches_dummy_variable_ols() {
    for seed in 0..20 {
        let inst = instance(seed, 200, 3, &[6, 9, 4]);
        let fit = absorbed(&inst);
        let oracle = dummy_ols(&inst);
        for (a, b) in fit.coef.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8, "seed {seed}: {a} vs {b}");
        }
    }
}

#[test]
fn two_way_vcov_matches_dense_sandwich() {
    for seed in 0..5 {
        let inst = instance(100 + seed, 300, 3, &[5, 7]);
        let fit = absorbed(&inst);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f: Vec<u64> = (0..300).map(|i| (i / 3) as u64).collect();
        let t: Vec<u64> = (0..300).map(|_| rng.random_range(0..25)).collect();
        let got = cluster_vcov(
            &fit.xtx_inv,
            &fit.xd,
            &fit.residuals,
            &[&ClusterDim::from_keys("f", &f), &ClusterDim::from_keys("t", &t)],
            SmallSample::Cgm,
        )
        .unwrap();
        let want = brute_two_way(&fit.xd, &fit.residuals, &f, &t);
        assert!((&got.raw - &want).amax() < 1e-10, "seed {seed}");
    }
}

#[test]
fn singleton_clusters_collapse_to_robust_sandwich() {
    let inst = instance(7, 120, 2, &[4]);
    let fit = absorbed(&inst);
    let ids: Vec<u32> = (0..120).collect();
    let a = ClusterDim::from_keys("a", &ids);
    let b = ClusterDim::from_keys("b", &ids);
    let two = cluster_vcov(&fit.xtx_inv, &fit.xd, &fit.residuals, &[&a, &b], SmallSample::None).unwrap();
    // HC0: (X'X)^-1 X' diag(e²) X (X'X)^-1
    let k = fit.xd.len();
    let meat = DMatrix::<f64>::from_fn(k, k, |p, q| {
        (0..120)
            .map(|i| fit.xd[p][i] * fit.xd[q][i] * fit.residuals[i] * fit.residuals[i])
            .sum::<f64>()
    });
    let hc0 = &fit.xtx_inv * meat * &fit.xtx_inv;
    assert!((&two.raw - &hc0).amax() < 1e-12);
}

#[test]
fn duplicated_rows_double_family_meat() {
    let inst = instance(9, 80, 2, &[3]);
    let fit = absorbed(&inst);
    let single: Vec<u32> = (0..80).collect();
    let meat1 = disruptr::regress::cluster_meat(&fit.xd, &fit.residuals, &ClusterDim::from_keys("f", &single));
    // Each family appears twice with identical scores: s_g doubles, so the
    // outer product quadruples while independent rows would double it.
    let xd2: Vec<Vec<f64>> = fit.xd.iter().map(|c| c.iter().chain(c).copied().collect()).collect();
    let e2: Vec<f64> = fit.residuals.iter().chain(&fit.residuals).copied().collect();
    let fam2: Vec<u32> = single.iter().chain(&single).copied().collect();
    let indep: Vec<u32> = (0..160).collect();
    let clustered = disruptr::regress::cluster_meat(&xd2, &e2, &ClusterDim::from_keys("f", &fam2));
    let independent = disruptr::regress::cluster_meat(&xd2, &e2, &ClusterDim::from_keys("i", &indep));
    assert!((&independent - &meat1 * 2.0).amax() < 1e-10);
    assert!((&clustered - &independent * 2.0).amax() < 1e-10);
}

fn family_row(fid: &str, countries: &[&str], tech: &str, year: i32) -> PatentRow {
    PatentRow {
        patent_id: format!("{fid}-1"),
        family_id: fid.into(),
        office: "US".into(),
        pub_year: Some(year),
        filing_year: Some(year - 1),
        granted: true,
        is_us_utility: true,
        countries: countries.iter().map(|c| c.to_string()).collect(),
        tech_field: Some(tech.into()),
    }
}

fn record(fid: &str, source: Source, cd: f64) -> CdRecord {
    CdRecord {
        family_id: fid.into(),
        source,
        n_f: 0,
        n_c: 0,
        n_p: 0,
        n_backward: 3,
        cd: Some(cd),
        window_years: 5,
        anchor: Anchor::Publication,
    }
}

fn spec(model: Model, controls: bool) -> RegressSpec {
    RegressSpec {
        model,
        controls,
        countries: vec!["DE".into(), "JP".into()],
        ..Default::default()
    }
}

#[test]
fn stacking_shapes() {
    let fams = build_families(&[
        family_row("a", &["US", "DE"], "1", 2000),
        family_row("b", &["CA"], "1", 2000),
        family_row("c", &["US"], "1", 2000),
    ]);
    let restricted = vec![
        record("a", Source::Restricted, 0.2),
        record("b", Source::Restricted, 0.1),
        CdRecord {
            cd: None,
            ..record("c", Source::Restricted, 0.0)
        },
    ];
    let extended = vec![
        record("a", Source::Extended, 0.1),
        record("b", Source::Extended, 0.0),
        record("c", Source::Extended, 0.3),
    ];
    let t = build_stacked(&restricted, &extended, &fams, None, &spec(Model::Interacted, true));
    let a_rows = t.rows.iter().filter(|r| r.family_id == "a").count();
    assert_eq!(a_rows, 4);
    assert!(t.rows.iter().filter(|r| r.family_id == "b").all(|r| r.country == "ROW"));
    assert_eq!(t.rows.iter().filter(|r| r.family_id == "c").count(), 0);
    assert_eq!(t.excluded.len(), 1);
    assert_eq!(t.countries, vec!["DE", "JP", "ROW"]);
    let n0 = t.rows.iter().filter(|r| r.source == Source::Extended).count();
    assert_eq!(n0 * 2, t.rows.len());
}

fn row(fid: &str, country: &str, source: Source, cd: f64, tech: &str, year: i32) -> StackedRow {
    StackedRow {
        family_id: fid.into(),
        country: country.into(),
        source,
        cd,
        tech: tech.into(),
        year,
        num_inventors: 0.01,
        num_countries: 1.0,
        backward: 0.0,
        coverage: None,
    }
}

fn table(rows: Vec<StackedRow>) -> StackedTable {
    StackedTable {
        rows,
        countries: vec!["DE".into(), "JP".into(), "ROW".into()],
        coverage_available: false,
        excluded: vec![],
    }
}

/// Noiseless outcome `0.1·D_DE + 0.05·D_DE·R` with one tech and one year.
#[test]
fn noiseless_design_recovers_coefficients_exactly() {
    let mut rows = Vec::new();
    for i in 0..40 {
        let country = if i % 2 == 0 { "DE" } else { "US" };
        // Two techs, each holding both countries, give two tech-year clusters.
        let tech = if (i / 2) % 2 == 0 { "1" } else { "2" };
        for (s, r) in [(Source::Extended, 0.0), (Source::Restricted, 1.0)] {
            let de = f64::from(u8::from(country == "DE"));
            rows.push(row(&format!("f{i}"), country, s, 0.1 * de + 0.05 * de * r, tech, 2000));
        }
    }
    for model in [Model::Interacted, Model::Simple] {
        let fit = fit_stacked(&table(rows.clone()), &spec(model, false)).unwrap();
        assert!((fit.beta("DE").unwrap() - 0.1).abs() < 1e-10, "{model:?}");
        assert!((fit.delta("DE").unwrap() - 0.05).abs() < 1e-10, "{model:?}");
    }
}

/// With one FE level and no controls, δ_c is the difference-in-differences
/// of cell means.
#[test]
fn delta_equals_difference_in_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut rows = Vec::new();
    let countries = ["US", "DE", "JP", "ROW"];
    for i in 0..400 {
        let c = countries[i % 4];
        let tech = if i % 8 < 4 { "a" } else { "b" };
        for s in [Source::Extended, Source::Restricted] {
            rows.push(row(&format!("f{i}"), c, s, rng.random_range(-1.0..1.0), tech, 2000));
        }
    }
    let cell_mean = |c: &str, s: Source| {
        let v: Vec<f64> = rows.iter().filter(|r| r.country == c && r.source == s).map(|r| r.cd).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let bias = |c: &str| cell_mean(c, Source::Restricted) - cell_mean(c, Source::Extended);
    // Single FE level: every row the same tech.
    let mut flat = rows.clone();
    for r in &mut flat {
        r.tech = "a".into();
    }
    // Clustering by tech-year needs two groups; varying the year would add a
    // FE level, so cluster variation comes from a second table below.
    for model in [Model::Simple, Model::Interacted] {
        let s = spec(model, false);
        let (problem, fes) = disruptr::regress::design(&table(flat.clone()), &s);
        let fit = fit_hdfe(&problem, &Absorber::new(fes)).unwrap();
        for c in ["DE", "JP", "ROW"] {
            let i = fit.names.iter().position(|n| *n == format!("D_{c}:R")).unwrap();
            assert!((fit.coef[i] - (bias(c) - bias("US"))).abs() < 1e-12, "{model:?} {c}");
        }
        if model == Model::Simple {
            let i = fit.names.iter().position(|n| n == "R").unwrap();
            assert!((fit.coef[i] - bias("US")).abs() < 1e-12);
        }
    }
}

#[test]
fn intercept_only_baseline_is_us_extended_mean() {
    let mut rows = Vec::new();
    for i in 0..30 {
        let c = if i % 3 == 0 { "DE" } else { "US" };
        let tech = if i % 2 == 0 { "a" } else { "b" };
        for s in [Source::Extended, Source::Restricted] {
            rows.push(row(&format!("f{i}"), c, s, (i as f64 * 0.7).cos(), tech, 2000));
        }
    }
    let t = table(rows.clone());
    let mut s = spec(Model::Simple, false);
    s.countries = vec![];
    let fit = fit_stacked(&t, &s).unwrap();
    let alpha = baseline_mean(&fit, &t.rows).unwrap();
    // Saturated in (country bucket, source) plus tech: the fitted US/extended
    // mean equals the raw mean because tech is balanced across cells.
    let us: Vec<f64> = rows
        .iter()
        .filter(|r| r.country == "US" && r.source == Source::Extended)
        .map(|r| r.cd)
        .collect();
    let want = us.iter().sum::<f64>() / us.len() as f64;
    assert!((alpha - want).abs() < 1e-10, "{alpha} vs {want}");
}

#[test]
fn empty_baseline_is_an_error() {
    let rows: Vec<StackedRow> = (0..10)
        .flat_map(|i| {
            [Source::Extended, Source::Restricted].map(|s| row(&format!("f{i}"), "DE", s, i as f64, ["a", "b"][i % 2], 2000))
        })
        .collect();
    let t = table(rows);
    let fit = fit_stacked(&t, &spec(Model::Simple, false)).unwrap();
    assert!(baseline_mean(&fit, &t.rows).is_err());
}

fn random_rows(seed: u64, families: usize) -> Vec<StackedRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let countries = ["US", "DE", "JP", "ROW"];
    let mut rows = Vec::new();
    for i in 0..families {
        let c = countries[rng.random_range(0..4)];
        let tech = ["a", "b", "c"][rng.random_range(0..3)];
        let year = 2000 + rng.random_range(0..4);
        let inv = rng.random_range(1..6) as f64 / 100.0;
        for s in [Source::Extended, Source::Restricted] {
            let mut r = row(&format!("f{i:04}"), c, s, rng.random_range(-1.0..1.0), tech, year);
            r.num_inventors = inv;
            r.backward = rng.random_range(0.0..3.0);
            rows.push(r);
        }
    }
    rows
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn frisch_waugh_on_random_instances(seed in 0u64..10_000, l1 in 2usize..6, l2 in 2usize..6, l3 in 2usize..4) {
        let inst = instance(seed, 150, 2, &[l1, l2, l3]);
        let fit = absorbed(&inst);
        let oracle = dummy_ols(&inst);
        for (a, b) in fit.coef.iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn vcov_symmetric_psd_and_row_order_invariant(seed in 0u64..10_000) {
        let rows = random_rows(seed, 120);
        let s = spec(Model::Interacted, true);
        let fit = fit_stacked(&table(rows.clone()), &s).unwrap();
        prop_assert!((&fit.vcov - fit.vcov.transpose()).amax() == 0.0);
        prop_assert!(fit.vcov.clone().symmetric_eigen().eigenvalues.iter().all(|&v| v > -1e-14));
        prop_assert!((0.0..=1.0).contains(&fit.within_r2));

        let mut shuffled = rows;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
        for i in (1..shuffled.len()).rev() {
            let j = rng.random_range(0..=i);
            shuffled.swap(i, j);
        }
        let fit2 = fit_stacked(&table(shuffled), &s).unwrap();
        prop_assert_eq!(&fit.names, &fit2.names);
        for (a, b) in fit.se.iter().zip(&fit2.se) {
            prop_assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn stacking_is_balanced(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pool = ["US", "DE", "JP", "FR", "CA"];
        let mut patents = Vec::new();
        let mut res = Vec::new();
        let mut ext = Vec::new();
        for i in 0..30 {
            let fid = format!("f{i}");
            let k = rng.random_range(1..4);
            let cs: Vec<&str> = (0..k).map(|_| pool[rng.random_range(0..pool.len())]).collect();
            patents.push(family_row(&fid, &cs, "1", 2000));
            let c1 = Counts::new(rng.random_range(0..3), rng.random_range(0..3), rng.random_range(0..3));
            res.push(CdRecord { cd: c1.cd(), ..record(&fid, Source::Restricted, 0.0) });
            ext.push(record(&fid, Source::Extended, 0.1));
        }
        let fams = build_families(&patents);
        let t = build_stacked(&res, &ext, &fams, None, &spec(Model::Interacted, true));
        let mut pairs = std::collections::BTreeMap::<(String, String), (usize, usize)>::new();
        for r in &t.rows {
            let e = pairs.entry((r.family_id.clone(), r.country.clone())).or_default();
            match r.source {
                Source::Extended => e.0 += 1,
                Source::Restricted => e.1 += 1,
            }
        }
        prop_assert!(pairs.values().all(|&v| v == (1, 1)));
    }
}

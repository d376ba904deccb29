//! Property tests for the model invariants.

use proptest::prelude::*;

use pagetime_core::browser::{bpe, BpeInput, RenderModel, Rounding};
use pagetime_core::fitting::{fit_affine, fit_log, validate, OlsAccumulator};
use pagetime_core::manifest::{
    parse_worksheet_csv, write_worksheet_csv, ManifestOptions, PageManifest, RawEntry,
};
use pagetime_core::predict::{predict_worksheet, BpeSource, PredictionConfig};
use pagetime_core::profile::{load_profile, save_profile, NetworkProfile, SizeTimeModel};
use pagetime_core::waterfall::{effective_parallelism, simulate, sweep, SimComponent};

fn entry_strategy() -> impl Strategy<Value = RawEntry> {
    (
        "[a-z]{1,8}",
        "[a-z0-9/._-]{0,16}",
        prop_oneof![
            Just("text/html".to_string()),
            Just("image/png".to_string()),
            Just("image/jpeg".to_string()),
            Just("text/css".to_string()),
            Just("javascript".to_string()),
            Just("application/x-javascript".to_string()),
            Just("application/json".to_string()),
        ],
        0u64..2_000_000,
        proptest::option::of(0.0f64..10_000.0),
        proptest::option::of(0.0f64..10_000.0),
    )
        .prop_map(|(host, path, mime, size_bytes, fb, cd)| RawEntry {
            url: format!("http://{host}.example.com/{path}"),
            mime,
            size_bytes,
            fb_ms: fb,
            cd_ms: cd,
        })
}

fn manifest_strategy() -> impl Strategy<Value = PageManifest> {
    proptest::collection::vec(entry_strategy(), 1..16).prop_map(|entries| {
        PageManifest::from_entries(entries, &ManifestOptions::default()).unwrap()
    })
}

fn measured_manifest_strategy() -> impl Strategy<Value = PageManifest> {
    proptest::collection::vec((entry_strategy(), 0.0f64..5_000.0, 0.0f64..5_000.0), 1..16).prop_map(
        |entries| {
            let entries = entries
                .into_iter()
                .map(|(mut e, fb, cd)| {
                    e.fb_ms = Some(fb);
                    e.cd_ms = Some(cd);
                    e
                })
                .collect();
            PageManifest::from_entries(entries, &ManifestOptions::default()).unwrap()
        },
    )
}

fn model_strategy() -> impl Strategy<Value = SizeTimeModel> {
    prop_oneof![
        (-1.0f64..1.0, -500.0f64..500.0)
            .prop_map(|(slope, intercept)| SizeTimeModel::Affine { slope, intercept }),
        (-10.0f64..10.0, -500.0f64..500.0).prop_map(|(a, b)| SizeTimeModel::Log { a, b }),
        (0.0f64..1_000.0).prop_map(|c| SizeTimeModel::Constant { c }),
    ]
}

fn profile_strategy() -> impl Strategy<Value = NetworkProfile> {
    (
        "[A-Z]{2}",
        proptest::collection::vec(0.0f64..2_000.0, 5),
        proptest::collection::vec(proptest::option::of(model_strategy()), 4),
    )
        .prop_map(|(country, constants, mut models)| NetworkProfile {
            country,
            t_dnsbp_ms: constants[0],
            t_cbp_ms: constants[1],
            t_dnssc_ms: constants[2],
            t_csc_ms: constants[3],
            t_sr_ms: constants[4],
            fbbp_model: models.remove(0),
            cdbp_model: models.remove(0),
            fbsc_model: models.remove(0),
            cdsc_model: models.remove(0),
        })
}

fn components_strategy() -> impl Strategy<Value = Vec<SimComponent>> {
    proptest::collection::vec(
        (0.0f64..2_000.0, 0.0f64..2_000.0, prop::bool::weighted(0.2)),
        1..24,
    )
    .prop_map(|raw| {
        raw.into_iter()
            .enumerate()
            .map(|(i, (fb, cd, is_js))| SimComponent {
                doc_order: (i + 1) as u32,
                fb_ms: fb,
                cd_ms: cd,
                is_js,
            })
            .collect()
    })
}

proptest! {
    // --- manifests ---------------------------------------------------------

    #[test]
    fn worksheet_serialization_round_trips(manifest in manifest_strategy()) {
        let bytes = write_worksheet_csv(&manifest);
        let reparsed = parse_worksheet_csv(&bytes).unwrap();
        prop_assert_eq!(reparsed, manifest);
    }

    #[test]
    fn domain_count_bounded_by_request_count(manifest in manifest_strategy()) {
        let agg = manifest.aggregates();
        prop_assert!(agg.m_domains <= agg.n_static + 1);
        prop_assert_eq!(agg.n_static, agg.o_js + agg.p_other);
    }

    #[test]
    fn aggregates_ignore_component_order(
        entries in proptest::collection::vec(entry_strategy(), 2..12),
        rotation in 1usize..11,
    ) {
        let options = ManifestOptions::default();
        let original = PageManifest::from_entries(entries.clone(), &options).unwrap();
        let mut rotated_entries = entries;
        let statics = rotated_entries.split_off(1);
        let rotation = rotation % statics.len().max(1);
        let mut reordered = statics[rotation..].to_vec();
        reordered.extend_from_slice(&statics[..rotation]);
        rotated_entries.extend(reordered);
        let rotated = PageManifest::from_entries(rotated_entries, &options).unwrap();

        let a = original.aggregates();
        let b = rotated.aggregates();
        prop_assert_eq!(a.total_bytes, b.total_bytes);
        prop_assert_eq!(a.m_domains, b.m_domains);
        prop_assert_eq!(a.o_js, b.o_js);
        prop_assert_eq!(a.p_other, b.p_other);
    }

    // --- profiles ----------------------------------------------------------

    #[test]
    fn profile_persistence_round_trips(profile in profile_strategy()) {
        let loaded = load_profile(&save_profile(&profile)).unwrap();
        prop_assert_eq!(loaded, profile);
    }

    #[test]
    fn affine_eval_monotone_for_nonnegative_slope(
        slope in 0.0f64..1.0,
        intercept in -500.0f64..500.0,
        a in 0u64..1_000_000,
        b in 0u64..1_000_000,
    ) {
        let model = SizeTimeModel::Affine { slope, intercept };
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(model.eval(lo).unwrap() <= model.eval(hi).unwrap());
    }

    #[test]
    fn log_eval_monotone_for_nonnegative_coefficient(
        a_coeff in 0.0f64..10.0,
        b_coeff in -500.0f64..500.0,
        x in 1u64..1_000_000,
        y in 1u64..1_000_000,
    ) {
        let model = SizeTimeModel::Log { a: a_coeff, b: b_coeff };
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        prop_assert!(model.eval(lo).unwrap() <= model.eval(hi).unwrap());
    }

    // --- fitting -----------------------------------------------------------

    #[test]
    fn affine_fit_recovers_random_generator(
        slope in -10.0f64..10.0,
        intercept in -1_000.0f64..1_000.0,
        x0 in 1.0f64..1_000.0,
        step in 0.5f64..50.0,
        n in 10usize..60,
    ) {
        let points: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let x = x0 + step * i as f64;
                (x, slope * x + intercept)
            })
            .collect();
        let fit = fit_affine(&points).unwrap();
        match fit.model {
            SizeTimeModel::Affine { slope: s, intercept: b } => {
                prop_assert!((s - slope).abs() <= 1e-6 * slope.abs().max(1.0));
                prop_assert!((b - intercept).abs() <= 1e-6 * intercept.abs().max(1.0));
            }
            _ => prop_assert!(false, "expected affine model"),
        }
    }

    #[test]
    fn log_fit_recovers_random_generator(
        a in -10.0f64..10.0,
        b in -1_000.0f64..1_000.0,
        n in 10usize..40,
    ) {
        let points: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let x = 10.0 + 25.0 * i as f64;
                (x, a * x.ln() + b)
            })
            .collect();
        let fit = fit_log(&points).unwrap();
        match fit.model {
            SizeTimeModel::Log { a: got_a, b: got_b } => {
                prop_assert!((got_a - a).abs() <= 1e-6 * a.abs().max(1.0));
                prop_assert!((got_b - b).abs() <= 1e-6 * b.abs().max(1.0));
            }
            _ => prop_assert!(false, "expected log model"),
        }
    }

    #[test]
    fn residuals_orthogonal_to_predictor(
        points in proptest::collection::vec((-1_000.0f64..1_000.0, -1_000.0f64..1_000.0), 3..50),
    ) {
        // Skip degenerate x spreads; fit_affine reports those as errors.
        prop_assume!(points.iter().any(|p| (p.0 - points[0].0).abs() > 1e-6));
        let fit = fit_affine(&points).unwrap();
        let (slope, intercept) = match fit.model {
            SizeTimeModel::Affine { slope, intercept } => (slope, intercept),
            _ => unreachable!(),
        };
        let mut sum_r = 0.0;
        let mut sum_rx = 0.0;
        let mut scale = 0.0;
        for &(x, y) in &points {
            let r = y - (slope * x + intercept);
            sum_r += r;
            sum_rx += r * x;
            scale += x.abs() * y.abs() + y.abs() + 1.0;
        }
        prop_assert!(sum_r.abs() <= 1e-9 * scale, "sum r {sum_r} scale {scale}");
        prop_assert!(sum_rx.abs() <= 1e-9 * scale, "sum rx {sum_rx} scale {scale}");
    }

    #[test]
    fn split_accumulation_merges_to_single_pass(
        points in proptest::collection::vec((-1_000.0f64..1_000.0, -1_000.0f64..1_000.0), 4..50),
        split in 1usize..49,
    ) {
        let split = split.min(points.len() - 1);
        let mut whole = OlsAccumulator::default();
        for &(x, y) in &points {
            whole.push(x, y);
        }
        let mut left = OlsAccumulator::default();
        let mut right = OlsAccumulator::default();
        for &(x, y) in &points[..split] {
            left.push(x, y);
        }
        for &(x, y) in &points[split..] {
            right.push(x, y);
        }
        left.merge(&right);
        match (whole.line(), left.line()) {
            (Some((s1, b1, _)), Some((s2, b2, _))) => {
                prop_assert!((s1 - s2).abs() <= 1e-9 * s1.abs().max(1.0));
                prop_assert!((b1 - b2).abs() <= 1e-9 * b1.abs().max(1.0));
            }
            (None, None) => {}
            other => prop_assert!(false, "merge/single disagree on degeneracy: {other:?}"),
        }
    }

    #[test]
    fn validation_is_permutation_and_scale_invariant(
        pairs in proptest::collection::vec((1.0f64..100_000.0, 1.0f64..100_000.0), 2..20),
        rotation in 1usize..19,
        factor in 0.001f64..1_000.0,
    ) {
        let baseline = validate(&pairs).unwrap();

        let rotation = rotation % pairs.len();
        let mut rotated = pairs[rotation..].to_vec();
        rotated.extend_from_slice(&pairs[..rotation]);
        let permuted = validate(&rotated).unwrap();
        prop_assert!((baseline.mean_error_pct - permuted.mean_error_pct).abs() < 1e-9);
        prop_assert!((baseline.stddev_error_pct - permuted.stddev_error_pct).abs() < 1e-9);

        let scaled_pairs: Vec<(f64, f64)> =
            pairs.iter().map(|&(p, m)| (p * factor, m * factor)).collect();
        let scaled = validate(&scaled_pairs).unwrap();
        prop_assert!(
            (baseline.mean_error_pct - scaled.mean_error_pct).abs()
                <= 1e-9 * baseline.mean_error_pct.max(1.0)
        );
        prop_assert!(
            (baseline.stddev_error_pct - scaled.stddev_error_pct).abs()
                <= 1e-9 * baseline.stddev_error_pct.max(1.0)
        );
    }

    // --- browser -----------------------------------------------------------

    #[test]
    fn bpe_monotone_and_bounded(
        fb1 in 0.001f64..10_000.0,
        fb_delta in 0.001f64..10_000.0,
        cd1 in 0.001f64..10_000.0,
        cd_delta in 0.001f64..10_000.0,
    ) {
        let raw = |fb: f64, cd: f64| {
            bpe(BpeInput { first_byte_ms: fb, avg_cd_ms: cd, rounding: Rounding::Raw }).unwrap()
        };
        prop_assert!(raw(fb1, cd1) >= 1.0);
        prop_assert!(raw(fb1 + fb_delta, cd1) > raw(fb1, cd1));
        prop_assert!(raw(fb1, cd1 + cd_delta) < raw(fb1, cd1));

        let rounded =
            bpe(BpeInput { first_byte_ms: fb1, avg_cd_ms: cd1, rounding: Rounding::NearestInt })
                .unwrap();
        prop_assert!(rounded >= 1.0);
        prop_assert!((rounded - raw(fb1, cd1)).abs() <= 0.5);
    }

    #[test]
    fn render_non_decreasing_within_class(
        n in prop_oneof![Just(20.0f64), Just(13.0f64), Just(5.0f64)],
        x1 in 1.0f64..5_000.0,
        dx in 0.0f64..5_000.0,
    ) {
        let model = RenderModel::default();
        prop_assert!(model.eval_ms(n, x1 + dx) >= model.eval_ms(n, x1));
    }

    // --- predictor ---------------------------------------------------------

    #[test]
    fn raising_bpe_never_raises_the_total(
        manifest in measured_manifest_strategy(),
        profile in profile_strategy(),
        bpe_low in 1.0f64..4.0,
        bpe_step in 0.1f64..4.0,
    ) {
        let config_low = PredictionConfig {
            bpe_source: BpeSource::Explicit(bpe_low),
            ..Default::default()
        };
        let config_high = PredictionConfig {
            bpe_source: BpeSource::Explicit(bpe_low + bpe_step),
            ..Default::default()
        };
        let low = predict_worksheet(&manifest, &profile, &config_low).unwrap();
        let high = predict_worksheet(&manifest, &profile, &config_high).unwrap();
        prop_assert!(high.total_ms <= low.total_ms + 1e-9);

        let has_parallel_time = low
            .rows
            .iter()
            .any(|r| r.parallelizable && r.fb_ms + r.cd_ms > 1e-6);
        if has_parallel_time {
            prop_assert!(high.total_ms < low.total_ms);
        }
        // Serial rows are untouched by the divisor.
        for (a, b) in low.rows.iter().zip(&high.rows) {
            if !a.parallelizable {
                prop_assert_eq!(a.sum_ms, b.sum_ms);
            }
        }
    }

    #[test]
    fn unit_bpe_reduces_to_plain_serial_sum(
        manifest in measured_manifest_strategy(),
        profile in profile_strategy(),
    ) {
        let config = PredictionConfig {
            bpe_source: BpeSource::Explicit(1.0),
            ..Default::default()
        };
        let breakdown = predict_worksheet(&manifest, &profile, &config).unwrap();
        let serial: f64 = manifest
            .components()
            .iter()
            .map(|c| c.measured_fb_ms.unwrap() + c.measured_cd_ms.unwrap())
            .sum();
        let expected = profile.t_dnsbp_ms
            + profile.t_cbp_ms
            + profile.t_dnssc_ms
            + profile.t_csc_ms
            + profile.t_sr_ms
            + serial;
        prop_assert!((breakdown.total_ms - expected).abs() <= 1e-9 * expected.max(1.0));
    }

    #[test]
    fn breakdown_rows_readd_to_total(
        manifest in measured_manifest_strategy(),
        profile in profile_strategy(),
        bpe_value in 1.0f64..8.0,
        include_render in any::<bool>(),
        include_server in any::<bool>(),
    ) {
        let config = PredictionConfig {
            bpe_source: BpeSource::Explicit(bpe_value),
            include_render,
            include_server,
            ..Default::default()
        };
        let b = predict_worksheet(&manifest, &profile, &config).unwrap();
        let readd = b.t_dnsbp_ms
            + b.t_cbp_ms
            + b.t_dnssc_ms
            + b.t_csc_ms
            + b.t_sr_ms
            + b.render_ms
            + b.rows.iter().map(|r| r.sum_ms).sum::<f64>();
        prop_assert!((readd - b.total_ms).abs() <= 0.01);
    }

    // --- simulator ---------------------------------------------------------

    #[test]
    fn makespan_bounds_and_monotonicity(
        components in components_strategy(),
        k in 1usize..10,
    ) {
        let serial: f64 = components.iter().map(|c| c.fb_ms + c.cd_ms).sum();
        let longest = components
            .iter()
            .map(|c| c.fb_ms + c.cd_ms)
            .fold(0.0, f64::max);
        let result = simulate(&components, k).unwrap();
        prop_assert!(result.makespan_ms + 1e-9 >= longest);
        prop_assert!(result.makespan_ms + 1e-9 >= serial / k as f64);
        prop_assert!(result.makespan_ms <= serial + 1e-9);

        let curve = sweep(&components, k).unwrap();
        for pair in curve.windows(2) {
            prop_assert!(pair[1].1 <= pair[0].1 + 1e-9);
        }
    }

    #[test]
    fn schedule_respects_durations_and_connection_limit(
        components in components_strategy(),
        k in 1usize..8,
    ) {
        let result = simulate(&components, k).unwrap();
        for (component, entry) in components.iter().zip(&result.per_component) {
            prop_assert_eq!(entry.doc_order, component.doc_order);
            prop_assert!(
                (entry.end_ms - entry.start_ms - component.duration_ms()).abs() <= 1e-9
            );
        }
        // Sweep the start/end events; ends resolve before starts at ties.
        let mut events: Vec<(f64, i32)> = Vec::new();
        for entry in &result.per_component {
            if entry.end_ms > entry.start_ms {
                events.push((entry.start_ms, 1));
                events.push((entry.end_ms, -1));
            }
        }
        events.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let mut active = 0i32;
        for (_, delta) in events {
            active += delta;
            prop_assert!(active <= k as i32, "more than {k} concurrent downloads");
        }
    }

    #[test]
    fn serial_makespan_is_exact_sum(components in components_strategy()) {
        let serial: f64 = components
            .iter()
            .fold(0.0, |acc, c| acc + (c.fb_ms + c.cd_ms));
        let result = simulate(&components, 1).unwrap();
        prop_assert_eq!(result.makespan_ms, serial);
        if serial > 0.0 {
            prop_assert_eq!(effective_parallelism(&components, 1).unwrap(), 1.0);
        }
    }

    #[test]
    fn removing_a_barrier_never_slows_the_page(
        components in components_strategy(),
        k in 1usize..8,
        pick in 0usize..24,
    ) {
        prop_assume!(components.iter().any(|c| c.is_js));
        let barrier_positions: Vec<usize> = components
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_js)
            .map(|(i, _)| i)
            .collect();
        let target = barrier_positions[pick % barrier_positions.len()];
        let mut relaxed = components.clone();
        relaxed[target].is_js = false;

        let with_barrier = simulate(&components, k).unwrap().makespan_ms;
        let without_barrier = simulate(&relaxed, k).unwrap().makespan_ms;
        prop_assert!(without_barrier <= with_barrier + 1e-9);
    }

    #[test]
    fn simulation_is_deterministic(components in components_strategy(), k in 1usize..8) {
        let a = simulate(&components, k).unwrap();
        let b = simulate(&components, k).unwrap();
        prop_assert_eq!(a, b);
    }
}

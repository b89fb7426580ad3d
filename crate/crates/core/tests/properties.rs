use chrono::{TimeZone, Utc};
use mammoseg_core::imaging::{
    close, connected_components, dilate, dilate_with_border, distance_transform, erode, erode_with_border, histogram,
    median_filter, open, watershed, Border, Connectivity, StructuringElement,
};
use mammoseg_core::report::round_half_up_2;
use mammoseg_core::{
    classify_risk, classify_t_category, classify_type, deserialize_report, feret_diameter, generate_report_at,
    pixels_to_cm, read_pgm, serialize_report, write_pgm, BinaryMask, Calibration, DiameterMeasurement, GrayImage,
    LabelMap, PatientRecord, PipelineProvenance, Raster, RiskStage, ScalarField, StepRecord, TCategory, TumorType,
};
use mammoseg_testkit::{disk_mask, oracles};
use proptest::prelude::*;

fn gray(max_side: usize) -> impl Strategy<Value = GrayImage> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(w, h)| {
        prop::collection::vec(any::<u8>(), w * h).prop_map(move |px| GrayImage::new(w, h, px).unwrap())
    })
}

fn mask(max_side: usize) -> impl Strategy<Value = BinaryMask> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(w, h)| {
        prop::collection::vec(any::<bool>(), w * h).prop_map(move |b| BinaryMask::new(w, h, b).unwrap())
    })
}

fn mask_32() -> impl Strategy<Value = BinaryMask> {
    prop::collection::vec(any::<bool>(), 32 * 32).prop_map(|b| BinaryMask::new(32, 32, b).unwrap())
}

fn se() -> impl Strategy<Value = StructuringElement> {
    prop::collection::vec((-2isize..=2, -2isize..=2), 0..10).prop_map(|mut offsets| {
        offsets.push((0, 0));
        StructuringElement::new(offsets).unwrap()
    })
}

fn subset(a: &BinaryMask, b: &BinaryMask) -> bool {
    a.is_subset_of(b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn pgm_round_trip(img in gray(40)) {
        let bytes = write_pgm(&img);
        prop_assert_eq!(read_pgm(&bytes).unwrap(), img.clone());
        prop_assert_eq!(write_pgm(&img), bytes);
    }

    #[test]
    fn histogram_counts_every_pixel(img in gray(30)) {
        prop_assert_eq!(histogram(&img).total(), img.len() as u64);
    }

    #[test]
    fn median_selects_from_window(img in gray(12), half in 1usize..3) {
        let window = 2 * half + 1;
        let out = median_filter(&img, window).unwrap();
        let r = half as isize;
        for y in 0..img.height() {
            for x in 0..img.width() {
                let v = out.get(x, y);
                let found = (-r..=r).any(|dy| (-r..=r).any(|dx| {
                    let sx = (x as isize + dx).clamp(0, img.width() as isize - 1) as usize;
                    let sy = (y as isize + dy).clamp(0, img.height() as isize - 1) as usize;
                    img.get(sx, sy) == v
                }));
                prop_assert!(found);
            }
        }
    }

    #[test]
    fn median_fixes_constant_images(w in 1usize..20, h in 1usize..20, v: u8, half in 1usize..4) {
        let img = GrayImage::filled(w, h, v).unwrap();
        prop_assert_eq!(median_filter(&img, 2 * half + 1).unwrap(), img);
    }

    #[test]
    fn median_is_monotone(a in gray(14), seed: u64) {
        let mut r = mammoseg_testkit::rng(seed);
        let bumped: Vec<u8> = a.pixels().iter().map(|&p| {
            use rand::Rng;
            p.saturating_add(r.random_range(0..=40))
        }).collect();
        let b = GrayImage::new(a.width(), a.height(), bumped).unwrap();
        let (ma, mb) = (median_filter(&a, 3).unwrap(), median_filter(&b, 3).unwrap());
        prop_assert!(ma.pixels().iter().zip(mb.pixels()).all(|(x, y)| x <= y));
    }

    #[test]
    fn erosion_and_dilation_are_dual(m in mask_32(), se in se()) {
        for border in [Border::Background, Border::Foreground] {
            let lhs = erode_with_border(&m, &se, border);
            let rhs = dilate_with_border(&m.complement(), &se.reflect(), !border).complement();
            prop_assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn duality_holds_literally_away_from_the_border(m in mask_32(), se in se()) {
        let lhs = erode(&m, &se);
        let rhs = dilate(&m.complement(), &se.reflect()).complement();
        for y in 2..30 {
            for x in 2..30 {
                prop_assert_eq!(lhs.get(x, y), rhs.get(x, y));
            }
        }
    }

    #[test]
    fn opening_and_closing_are_idempotent(m in mask_32(), se in se()) {
        let sq = StructuringElement::default();
        for s in [&sq, &se] {
            let o = open(&m, s);
            let c = close(&m, s);
            prop_assert_eq!(open(&o, s), o.clone());
            prop_assert_eq!(close(&c, s), c.clone());
            prop_assert!(subset(&o, &m));
            prop_assert!(subset(&m, &c));
        }
    }

    #[test]
    fn erosion_shrinks_and_dilation_grows(m in mask_32(), se in se()) {
        prop_assert!(subset(&erode(&m, &se), &m));
        prop_assert!(subset(&m, &dilate(&m, &se)));
    }

    #[test]
    fn components_partition_the_foreground(m in mask(24), eight: bool) {
        let conn = if eight { Connectivity::Eight } else { Connectivity::Four };
        let (labels, stats) = connected_components(&m, conn);
        prop_assert_eq!(labels.foreground(), m.clone());
        prop_assert_eq!(stats.len() as u32, labels.num_labels());
        for (i, s) in stats.iter().enumerate() {
            prop_assert_eq!(s.label, i as u32 + 1);
            prop_assert_eq!(labels.labels().iter().filter(|&&l| l == s.label).count(), s.area);
        }
    }

    #[test]
    fn watershed_partitions_into_connected_marker_regions(
        (w, h, values, seeds) in (2usize..14, 2usize..14).prop_flat_map(|(w, h)| (
            Just(w),
            Just(h),
            prop::collection::vec(0u8..8, w * h),
            prop::collection::btree_set(0..w * h, 1..5),
        ))
    ) {
        let field = ScalarField::new(w, h, values.iter().map(|&v| f64::from(v)).collect()).unwrap();
        let mut marker_px = vec![0u32; w * h];
        for (k, &i) in seeds.iter().enumerate() {
            marker_px[i] = k as u32 + 1;
        }
        let markers = LabelMap::new(w, h, marker_px.clone()).unwrap();
        let out = watershed(&field, &markers, None).unwrap();
        let k = seeds.len() as u32;
        let used: std::collections::BTreeSet<u32> = out.labels().iter().copied().collect();
        prop_assert_eq!(used, (1..=k).collect());
        for (i, &l) in marker_px.iter().enumerate() {
            if l != 0 {
                prop_assert_eq!(out.labels()[i], l);
            }
        }
        for l in 1..=k {
            let region = out.region_mask(l);
            let start = region.bits().iter().position(|&b| b).unwrap();
            let reach = oracles::reachable(&region, start, true);
            prop_assert!(region.bits().iter().zip(&reach).all(|(&b, &r)| b == r));
        }
    }

    #[test]
    fn distance_is_zero_exactly_on_background(m in mask(20)) {
        let dt = distance_transform(&m);
        for (i, &b) in m.bits().iter().enumerate() {
            let d = dt.values()[i];
            if b { prop_assert!(d >= 1.0) } else { prop_assert_eq!(d, 0.0) }
        }
    }

    #[test]
    fn feret_bounds_bbox_and_ignores_translation(m in mask(12), dx in 0usize..6, dy in 0usize..6) {
        prop_assume!(m.count() > 0);
        let d = feret_diameter(&m).unwrap();
        let pts: Vec<(usize, usize)> = (0..m.len()).filter(|&i| m.bits()[i]).map(|i| (i % m.width(), i / m.width())).collect();
        let (x0, x1) = (pts.iter().map(|p| p.0).min().unwrap(), pts.iter().map(|p| p.0).max().unwrap());
        let (y0, y1) = (pts.iter().map(|p| p.1).min().unwrap(), pts.iter().map(|p| p.1).max().unwrap());
        prop_assert!(d >= (x1 - x0).max(y1 - y0) as f64);
        let shifted = BinaryMask::from_fn(m.width() + dx, m.height() + dy, |x, y| {
            x >= dx && y >= dy && m.get(x - dx, y - dy)
        }).unwrap();
        prop_assert_eq!(feret_diameter(&shifted).unwrap(), d);
    }

    #[test]
    fn pixels_to_cm_is_strictly_monotone(a in 0.0f64..1e4, step in 1e-3f64..1e3, c in 1e-4f64..1.0) {
        let cal = Calibration::new(c).unwrap();
        prop_assert!(pixels_to_cm(a, cal) < pixels_to_cm(a + step, cal));
    }

    #[test]
    fn classification_is_monotone_and_consistent(d1 in 0.0f64..10.0, d2 in 0.0f64..10.0) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(classify_risk(lo).unwrap() <= classify_risk(hi).unwrap());
        if lo > 0.0 {
            prop_assert!(classify_t_category(lo * 10.0, false).unwrap() <= classify_t_category(hi * 10.0, false).unwrap());
        }
        for d in [lo, hi, 0.0] {
            let healthy = classify_type(d).unwrap() == TumorType::Healthy;
            let no_risk = classify_risk(d).unwrap() == RiskStage::NoRisk;
            prop_assert_eq!(healthy, no_risk);
            prop_assert_eq!(healthy, d == 0.0);
        }
    }

    #[test]
    fn reports_round_trip_and_stay_consistent(
        px in 0.0f64..400.0,
        c in 1e-3f64..0.1,
        secs in 0i64..4_000_000_000,
        id in "[A-Za-z0-9-]{1,12}",
        age in prop::option::of(1u32..120),
        manual: bool,
    ) {
        let cal = Calibration::new(c).unwrap();
        let m = if manual {
            let line = mammoseg_core::PixelLine::new(
                mammoseg_core::Point::new(0.0, 0.0),
                mammoseg_core::Point::new(px, 0.0),
            );
            DiameterMeasurement::manual(&line, cal)
        } else {
            DiameterMeasurement { pixels: px, cm: pixels_to_cm(px, cal), method: mammoseg_core::MeasurementMethod::Auto, component_area_px: Some(7) }
        };
        let mut record = PatientRecord::new(id);
        record.age_years = age;
        let mut prov = PipelineProvenance::default();
        prov.push(StepRecord::new("median").with("window", 3));
        let at = Utc.timestamp_opt(secs, 0).unwrap();
        let report = generate_report_at(record, &m, cal, prov, at).unwrap();
        prop_assert!(report.is_consistent());
        prop_assert_eq!(report.tumor_type, classify_type(report.diameter_cm).unwrap());
        prop_assert_eq!(report.risk_stage, classify_risk(report.diameter_cm).unwrap());
        let text = serialize_report(&report);
        let back = deserialize_report(&text).unwrap();
        prop_assert_eq!(&back, &report);
        prop_assert_eq!(serialize_report(&back), text);
    }
}

#[test]
fn disk_feret_stays_in_discretisation_band() {
    for r in [5usize, 10, 20, 30] {
        let size = 2 * r + 9;
        let c = (size / 2) as f64;
        let d = feret_diameter(&disk_mask(size, size, c, c, r as f64)).unwrap();
        let r = r as f64;
        assert!((2.0 * r - 2.0..=2.0 * r + 2.0).contains(&d), "r={r}: {d}");
    }
}

#[test]
fn t_categories_partition_a_dense_grid() {
    let bounds: [f64; 5] = [1.0, 5.0, 10.0, 20.0, 50.0];
    let mut grid: Vec<f64> = (1..=8000).map(|i| f64::from(i) * 0.01).collect();
    for b in bounds {
        grid.extend([b, b - 1e-9, b + 1e-9, b.next_up(), b.next_down()]);
    }
    grid.extend([f64::MIN_POSITIVE, 1e-9, 1e6]);
    for d in grid {
        let t = classify_t_category(d, false).unwrap();
        let expected = match d {
            d if d <= 1.0 => TCategory::T1mi,
            d if d <= 5.0 => TCategory::T1a,
            d if d <= 10.0 => TCategory::T1b,
            d if d <= 20.0 => TCategory::T1c,
            d if d <= 50.0 => TCategory::T2,
            _ => TCategory::T3,
        };
        assert_eq!(t, expected, "d = {d}");
        assert_eq!(classify_t_category(d, true).unwrap(), TCategory::T4);
    }
}

#[test]
fn display_rounding_is_half_up() {
    assert_eq!(round_half_up_2(1.005_000_1), 1.01);
    assert_eq!(round_half_up_2(1.2), 1.2);
    assert_eq!(round_half_up_2(0.125), 0.13);
}

use mammoseg_core::image::{BinaryMask, LabelMap, Raster};
use mammoseg_core::imaging::{
    connected_components, distance_transform, find_markers, histogram, median_filter, otsu_threshold,
    squared_distance_transform, watershed, Connectivity, Histogram, DEFAULT_H_MIN,
};
use mammoseg_core::measurement::feret_diameter;
use mammoseg_testkit::{disk_mask, oracles, random_histogram, random_image, random_mask, rng, two_disk_mask};
use rand::Rng;

#[test]
fn otsu_two_level_example_matches_exhaustive_search() {
    let mut bins = [0u64; 256];
    bins[50] = 6;
    bins[200] = 4;
    let h = Histogram::from_bins(bins);
    assert_eq!(oracles::otsu(&h), 50);
    assert_eq!(otsu_threshold(&h).unwrap(), 50);
    // Every t in [50, 199] is an equal maximiser.
    let best = oracles::between_class_variance(&h, 50);
    assert!((50..200).all(|t| oracles::between_class_variance(&h, t) == best));
    assert!(oracles::between_class_variance(&h, 49) < best);
}

#[test]
fn otsu_matches_exhaustive_search_on_random_histograms() {
    let mut r = rng(11);
    for case in 0..100 {
        let h = random_histogram(&mut r, case);
        assert_eq!(otsu_threshold(&h).unwrap(), oracles::otsu(&h), "case {case}: {:?}", h.bins());
    }
}

#[test]
fn otsu_on_real_image_histograms() {
    let mut r = rng(12);
    for _ in 0..20 {
        let img = random_image(&mut r, 9, 7);
        let h = histogram(&img);
        assert_eq!(otsu_threshold(&h).unwrap(), oracles::otsu(&h));
    }
}

#[test]
fn median_matches_sorted_window() {
    let mut r = rng(21);
    for _ in 0..30 {
        let img = random_image(&mut r, 8, 8);
        assert_eq!(median_filter(&img, 3).unwrap(), oracles::median(&img, 3));
    }
    for window in [5, 7, 9] {
        let w = r.random_range(1..20);
        let h = r.random_range(1..20);
        let img = random_image(&mut r, w, h);
        assert_eq!(median_filter(&img, window).unwrap(), oracles::median(&img, window), "{w}x{h} window {window}");
    }
}

#[test]
fn distance_transform_matches_all_pairs_scan() {
    let mut r = rng(31);
    for i in 0..40 {
        let density = [0.2, 0.5, 0.8, 0.95][i % 4];
        let m = random_mask(&mut r, 12, 12, density);
        assert_eq!(squared_distance_transform(&m), oracles::squared_distance(&m), "mask {i}");
    }
    // Non-square shapes and the all-foreground frame case.
    for (w, h) in [(1, 1), (1, 9), (9, 1), (13, 5)] {
        let m = BinaryMask::filled(w, h, true).unwrap();
        assert_eq!(squared_distance_transform(&m), oracles::squared_distance(&m));
        let m = random_mask(&mut r, w, h, 0.7);
        assert_eq!(squared_distance_transform(&m), oracles::squared_distance(&m));
    }
}

#[test]
fn component_labels_match_reachability() {
    let mut r = rng(41);
    for i in 0..30 {
        let m = random_mask(&mut r, 16, 16, 0.45);
        for conn in [Connectivity::Four, Connectivity::Eight] {
            let (labels, stats) = connected_components(&m, conn);
            let eight = conn == Connectivity::Eight;
            for p in (0..m.len()).filter(|&p| m.bits()[p]) {
                let reach = oracles::reachable(&m, p, eight);
                for q in (0..m.len()).filter(|&q| m.bits()[q]) {
                    assert_eq!(
                        labels.labels()[p] == labels.labels()[q],
                        reach[q],
                        "mask {i} conn {conn} pixels {p} {q}"
                    );
                }
            }
            let total: usize = stats.iter().map(|s| s.area).sum();
            assert_eq!(total, m.count());
        }
    }
}

#[test]
fn feret_matches_all_pairs() {
    let mut r = rng(51);
    for _ in 0..40 {
        let w = r.random_range(1..=20);
        let h = r.random_range(1..=20);
        let density = r.random_range(0.05..0.9);
        let m = random_mask(&mut r, w, h, density);
        if m.count() == 0 {
            continue;
        }
        let got = feret_diameter(&m).unwrap();
        assert_eq!(got, oracles::feret(&m));
    }
}

#[test]
fn watershed_keeps_disjoint_blobs_apart() {
    let a = disk_mask(30, 14, 6.0, 6.0, 4.0);
    let b = disk_mask(30, 14, 22.0, 7.0, 5.0);
    let blobs = BinaryMask::new(30, 14, a.bits().iter().zip(b.bits()).map(|(&p, &q)| p || q).collect()).unwrap();
    let field = distance_transform(&blobs).negated();
    let mut seeds = vec![0u32; blobs.len()];
    seeds[6 * 30 + 6] = 1;
    seeds[7 * 30 + 22] = 2;
    let markers = LabelMap::new(30, 14, seeds).unwrap();
    let out = watershed(&field, &markers, Some(&blobs)).unwrap();
    assert_eq!(out.region_mask(1), a);
    assert_eq!(out.region_mask(2), b);
}

#[test]
fn two_disk_split_matches_seeded_growth() {
    let mask = two_disk_mask(6.0, 10.0);
    let field = distance_transform(&mask).negated();
    let markers = find_markers(&field, &mask, DEFAULT_H_MIN).unwrap();
    assert_eq!(markers.num_labels(), 2);
    let out = watershed(&field, &markers, Some(&mask)).unwrap();
    let expected = oracles::seeded_growth(&field, &mask, markers.labels());
    for label in 1..=2u32 {
        let got = out.labels().iter().filter(|&&l| l == label).count() as f64;
        let want = expected.iter().filter(|&&l| l == label).count() as f64;
        assert!((got - want).abs() <= 0.05 * want, "label {label}: {got} vs {want}");
    }
    assert_eq!(out.foreground(), mask);
}

#[test]
fn markers_match_h_minima_oracle() {
    let single = disk_mask(21, 21, 10.0, 10.0, 8.0);
    let field = distance_transform(&single).negated();
    let m = find_markers(&field, &single, DEFAULT_H_MIN).unwrap();
    assert_eq!(m.labels(), oracles::h_minima_markers(&field, &single, DEFAULT_H_MIN).as_slice());
    assert_eq!(m.num_labels(), 1);
    assert_eq!(m.get(10, 10), 1);

    let pair = two_disk_mask(5.0, 16.0);
    let field = distance_transform(&pair).negated();
    let m = find_markers(&field, &pair, DEFAULT_H_MIN).unwrap();
    assert_eq!(m.labels(), oracles::h_minima_markers(&field, &pair, DEFAULT_H_MIN).as_slice());
    assert_eq!(m.num_labels(), 2);
}

#[test]
fn markers_match_oracle_on_random_fields() {
    let mut r = rng(61);
    for i in 0..25 {
        let (w, h) = (r.random_range(2..12), r.random_range(2..12));
        let values: Vec<f64> = (0..w * h).map(|_| r.random_range(0..6) as f64 * 0.5).collect();
        let field = mammoseg_core::ScalarField::new(w, h, values).unwrap();
        let mut domain = random_mask(&mut r, w, h, 0.8);
        if domain.count() == 0 {
            domain.set(0, 0, true);
        }
        let hval = [0.0, 0.5, 1.0, 2.5][i % 4];
        let got = find_markers(&field, &domain, hval).unwrap();
        assert_eq!(got.labels(), oracles::h_minima_markers(&field, &domain, hval).as_slice(), "case {i}");
    }
}

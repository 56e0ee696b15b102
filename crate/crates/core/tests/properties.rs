use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shapecx::evaluation::{average_ranks, rank, spearman, spearman_values};
use shapecx::imaging::{augment, fill_ratio, load_image, preprocess, save_pgm, save_png, DEFAULT_THRESHOLD};
use shapecx::measures::{
    combine, combine_equalized, compression_complexity, deflate, fft_complexity, inflate, Component, ScoreVector,
};
use shapecx::vae::vae_complexity;
use shapecx::{Mask, RawImage, VaeModel};

fn noise_mask() -> impl Strategy<Value = Mask> {
    prop::collection::vec(any::<bool>(), 4096).prop_map(|bits| Mask::from_fn("n", move |x, y| bits[y * 64 + x]))
}

/// Unions of up to four axis-aligned rectangles.
fn blocky_mask() -> impl Strategy<Value = Mask> {
    prop::collection::vec((0usize..64, 0usize..64, 1usize..40, 1usize..40), 1..5).prop_map(|rects| {
        Mask::from_fn("b", move |x, y| {
            rects.iter().any(|&(rx, ry, w, h)| x >= rx && x < rx + w && y >= ry && y < ry + h)
        })
    })
}

fn any_mask() -> impl Strategy<Value = Mask> {
    prop_oneof![noise_mask(), blocky_mask()]
}

fn distinct_scores(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3f64..1e3, 2..max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spearman_symmetric_and_bounded(a in distinct_scores(40), seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = a.iter().map(|_| rng.random_range(-5.0..5.0)).collect();
        if let Some(r) = spearman_values(&a, &b) {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r));
            prop_assert_eq!(Some(r), spearman_values(&b, &a));
        }
    }

    #[test]
    fn spearman_invariant_under_monotone_maps(a in distinct_scores(40), b in distinct_scores(40)) {
        let n = a.len().min(b.len());
        let (a, b) = (&a[..n], &b[..n]);
        let mapped: Vec<f64> = a.iter().map(|v| (v / 100.0).exp() * 3.0 + 1.0).collect();
        let base = spearman_values(a, b);
        let after = spearman_values(&mapped, b);
        match (base, after) {
            (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-12),
            (x, y) => prop_assert_eq!(x.is_none(), y.is_none()),
        }
    }

    #[test]
    fn self_correlation_is_one(a in distinct_scores(30)) {
        let named: Vec<(String, f64)> = a.iter().enumerate().map(|(i, &v)| (format!("s{i}"), v)).collect();
        let r = rank(&named).unwrap();
        if a.iter().any(|&v| v != a[0]) {
            prop_assert!((spearman(&r, &r).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ranks_sum_to_triangular(values in prop::collection::vec(prop_oneof![-3i32..3, -1000i32..1000], 1..60)) {
        let v: Vec<f64> = values.iter().map(|&x| x as f64).collect();
        let n = v.len() as f64;
        let sum: f64 = average_ranks(&v).iter().sum();
        prop_assert!((sum - n * (n + 1.0) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn combine_is_monotone(base in prop::array::uniform3(0.0f64..1.0), bump in 0.0f64..1.0, which in 0usize..3) {
        let sv = |c: [f64; 3]| ScoreVector { id: "x".into(), fill: 0.5, compression: c[0], fft: c[1], vae: Some(c[2]) };
        let mut up = base;
        up[which] = (up[which] + bump).min(1.0);
        let lo = combine(&sv(base), &Component::COMBINED).unwrap();
        let hi = combine(&sv(up), &Component::COMBINED).unwrap();
        prop_assert!(hi >= lo - 1e-15);
        prop_assert!((0.0..=1.0).contains(&lo));
    }

    #[test]
    fn equalized_components_in_unit_range(rows in prop::collection::vec(prop::array::uniform3(0.0f64..1.0), 2..20)) {
        let all: Vec<ScoreVector> = rows
            .iter()
            .enumerate()
            .map(|(i, c)| ScoreVector { id: format!("r{i}"), fill: 0.0, compression: c[0], fft: c[1], vae: Some(c[2]) })
            .collect();
        for v in combine_equalized(&all, &Component::COMBINED).unwrap() {
            prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
        }
    }

    #[test]
    fn deflate_round_trips(bytes in prop::collection::vec(prop_oneof![Just(0u8), Just(255u8), any::<u8>()], 0..6000)) {
        prop_assert_eq!(inflate(&deflate(&bytes)).unwrap(), bytes);
    }

    #[test]
    fn measures_in_unit_range(m in any_mask()) {
        for v in [fill_ratio(&m), compression_complexity(&m), fft_complexity(&m)] {
            prop_assert!((0.0..=1.0).contains(&v), "{v}");
        }
    }

    #[test]
    fn fft_contrast_and_flip_invariant(m in any_mask()) {
        let f = fft_complexity(&m);
        prop_assert_eq!(f, fft_complexity(&m.inverted()));
        prop_assert!((f - fft_complexity(&m.hflip())).abs() < 1e-12);
        prop_assert!((f - fft_complexity(&m.vflip())).abs() < 1e-12);
    }

    #[test]
    fn compression_nearly_flip_invariant(m in any_mask()) {
        let c = compression_complexity(&m);
        prop_assert!((c - compression_complexity(&m.hflip())).abs() < 0.05);
        prop_assert!((c - compression_complexity(&m.vflip())).abs() < 0.05);
    }

    #[test]
    fn fill_flip_invariant(m in any_mask()) {
        let f = fill_ratio(&m);
        prop_assert_eq!(f, fill_ratio(&m.hflip()));
        prop_assert_eq!(f, fill_ratio(&m.vflip()));
    }

    #[test]
    fn augment_keeps_masks_binary(m in blocky_mask(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert!(augment(&m, &mut rng).is_binary());
    }

    #[test]
    fn preprocess_is_idempotent(m in blocky_mask()) {
        // Corner pixels pin the bounding box to the full frame.
        let framed = Mask::from_fn("f", |x, y| m.get(x, y) > 0.5 || ((x == 0 || x == 63) && (y == 0 || y == 63)));
        let once = preprocess(&framed.to_raw(), DEFAULT_THRESHOLD).unwrap();
        let twice = preprocess(&once.to_raw(), DEFAULT_THRESHOLD).unwrap();
        prop_assert_eq!(once.pixels(), framed.pixels());
        prop_assert_eq!(twice.pixels(), once.pixels());
    }

    #[test]
    fn image_files_round_trip(w in 1usize..50, h in 1usize..50, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = RawImage::new(w, h, (0..w * h).map(|_| rng.random()).collect()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for name in ["a.pgm", "a.png"] {
            let path = dir.path().join(name);
            if name.ends_with("pgm") { save_pgm(&img, &path).unwrap() } else { save_png(&img, &path).unwrap() }
            prop_assert_eq!(&load_image(&path).unwrap(), &img);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn vae_score_symmetric_and_bounded(m in blocky_mask(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = VaeModel::standard(16, &mut rng).unwrap();
        let b = VaeModel::standard(64, &mut rng).unwrap();
        let ab = vae_complexity(&a, &b, &m).unwrap();
        prop_assert_eq!(ab, vae_complexity(&b, &a, &m).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
    }
}

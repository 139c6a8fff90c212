use detbox::decompose::{sw_decompose, DualOptions};

// frozen from a reference sweep (largest observed 4.03 and 2.94)
const SMOOTHING_K: f64 = 6.0;
const MAIN_TERM_K: f64 = 4.0;

const CONFIGS: [(i64, u64, f64); 7] = [
    (1, 64, 8.0),
    (1, 100, 10.0),
    (2, 100, 30.0),
    (-3, 120, 20.0),
    (1, 150, 60.0),
    (5, 200, 15.0),
    (1, 200, 100.0),
];

#[test]
fn decomposition_bounds() {
    let opts = DualOptions::default();
    for (r, x, h) in CONFIGS {
        let d = sw_decompose(r, x, h, &opts).unwrap();
        assert!((d.s_w - d.a_w - d.b_w).abs() <= 1e-12 * d.s_w);
        assert!(d.smoothing_ratio() <= SMOOTHING_K, "{r} {x} {h}: {}", d.smoothing_ratio());
        assert!(d.main_term_ratio() <= MAIN_TERM_K, "{r} {x} {h}: {}", d.main_term_ratio());
        // truncation budget: 1% of B_w, or 1e-6 of S_w when B_w is tiny
        let budget = (0.01 * d.b_w.abs()).max(1e-6 * d.s_w);
        assert!(
            (d.b_w - d.b_w_dual).abs() <= budget,
            "{r} {x} {h}: {} vs {}",
            d.b_w,
            d.b_w_dual
        );
    }
}

#[test]
fn larger_truncation_tightens_gap() {
    let coarse = sw_decompose(1, 100, 10.0, &DualOptions { k: 2.0, ..DualOptions::default() }).unwrap();
    let fine = sw_decompose(1, 100, 10.0, &DualOptions { k: 8.0, ..DualOptions::default() }).unwrap();
    assert!(fine.dual_relative_gap() < coarse.dual_relative_gap());
    assert!(fine.dual_relative_gap() < 1e-4);
}

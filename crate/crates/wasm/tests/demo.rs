use skorolab_wasm::{fpt_data, paths_data, step_data};

#[test]
fn paths_are_separated_and_reproducible() {
    let a = paths_data(0.1, 2.0, 3, 5).unwrap();
    let b = paths_data(0.1, 2.0, 3, 5).unwrap();
    assert_eq!(a.len(), b.len());
    assert!(a.iter().zip(&b).all(|(x, y)| x == y || (x.is_nan() && y.is_nan())));
    let ends = a.chunks(2).filter(|c| c[0] == f64::INFINITY).count();
    assert_eq!(ends, 4);
    // deterministic path starts at r0 = 1
    assert_eq!(&a[..2], &[0.0, 1.0]);
    assert!(paths_data(1.5, 2.0, 1, 0).is_err());
}

#[test]
fn fpt_curve_layout() {
    let d = fpt_data(0.2, 2.0, 50, 20, 1).unwrap();
    assert_eq!(d.len(), 150 + 1 + 20);
    assert_eq!(d[150], 20.0);
    let cdf: Vec<f64> = (0..50).map(|i| d[3 * i + 2]).collect();
    assert!(cdf.windows(2).all(|w| w[1] >= w[0]));
    assert!(cdf[49] > 0.999);
    let alpha = std::f64::consts::FRAC_PI_2;
    assert!(d[151..].iter().all(|t| (t - alpha).abs() < 0.5));
}

#[test]
fn step_instance() {
    let v = step_data(0.4, 0.5, 1.0).unwrap();
    assert_eq!(v[0], 1.0);
    assert!((v[1] - 1.25f64.ln()).abs() < 1e-12);
    assert!((v[2] - 1.25f64.ln()).abs() < 1e-3);
    let v = step_data(0.4, 0.5, 1.1).unwrap();
    assert!((v[2] - 1.25f64.ln()).abs() < 1e-3);
}

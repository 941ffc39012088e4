use asep2d_demo::{bound_csv, coupled_csv, field_values};

const DRIFT: &str = "1 0 3/4\n-1 0 1/4\n0 1 1/2\n0 -1 1/4\n";

#[test]
fn field_at_large_lambda() {
    let v = field_values(0.3, 0.2, 1e6, [0.25, 0.125, 0.25, 0.125]).unwrap();
    assert_eq!(v.len(), 4);
    assert!((v[0] * 2e6 - 1.0).abs() < 1e-3 && (v[1] * 2e6 - 1.0).abs() < 1e-3);
    assert!(field_values(0.3, 0.2, 1.0, [0.0, 0.1, 0.2, 0.0]).is_err());
}

#[test]
fn bound_curve_shape() {
    let csv = bound_csv(DRIFT, 1e-4, 1e-2, 3).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "lambda,bound_general,err_general,bound_axis,err_axis");
    assert_eq!(rows.len(), 4);
    assert!(rows[1].ends_with(','), "axis columns stay empty for a general kernel");
    assert!(bound_csv("1 0 1\n-1 0 1\n0 1 1\n0 -1 1\n", 1e-4, 1e-2, 3).is_err());
}

#[test]
fn coupled_run_is_seeded() {
    let a = coupled_csv(DRIFT, 12, 0.5, 2.0, 200, 7).unwrap();
    assert_eq!(a, coupled_csv(DRIFT, 12, 0.5, 2.0, 200, 7).unwrap());
    assert_ne!(a, coupled_csv(DRIFT, 12, 0.5, 2.0, 200, 8).unwrap());
    let first: Vec<f64> = a.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first, vec![0.0, 1.0, 0.0, 0.0, 0.0]);
}

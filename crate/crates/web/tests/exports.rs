use kmr_web::{certify_instance, g_profile, t_curve};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).expect("valid json")
}

#[test]
fn t_curve_is_positive() {
    let v = parse(&t_curve(1.29, 2, 100));
    assert_eq!(v["t"].as_array().unwrap().len(), 100);
    assert!(v["min"].as_f64().unwrap() > 0.0);
}

#[test]
fn t_curve_rejects_bad_alpha() {
    let v = parse(&t_curve(0.5, 2, 10));
    assert!(v["error"].is_string());
}

#[test]
fn separated_pair_is_certified_and_recovered() {
    let v = parse(&certify_instance("pair", 3.5, 40, 3));
    assert_eq!(v["implies"], "unique_optimum", "{v}");
    assert_eq!(v["decision"], "achieved");
    assert_eq!(v["points"].as_array().unwrap().len(), 80);
    assert!(v["margins"]["d"].as_f64().unwrap() > 0.0);
}

#[test]
fn large_instance_skips_lp() {
    let v = parse(&certify_instance("hexagon7", 2.2, 30, 0));
    assert!(v["decision"].is_null());
    assert!(parse(&certify_instance("square", 3.0, 10, 0))["error"].is_string());
}

#[test]
fn g_profile_is_symmetric() {
    let v = parse(&g_profile(3.0, 2, 1.4, 61));
    let vals: Vec<f64> = v["value"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    for j in 0..vals.len() {
        assert!((vals[j] - vals[vals.len() - 1 - j]).abs() < 1e-6);
    }
}

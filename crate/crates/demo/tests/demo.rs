use hsaw_demo::{render, roc_report, scene_label, scene_len, som_fit, SIZE};

#[test]
fn render_returns_frame_then_flow_magnitude() {
    let n = scene_len(2, 7).unwrap();
    assert_eq!(n, 256);
    let out = render(2, 7, 10).unwrap();
    assert_eq!(out.len(), 2 * SIZE * SIZE);
    assert!(out[..SIZE * SIZE].iter().all(|v| (-1.0..=1.0).contains(v)));
    assert!(out[SIZE * SIZE..].iter().all(|v| *v >= 0.0) && out[SIZE * SIZE..].iter().any(|v| *v > 0.0));
    assert_eq!(scene_label(1, 7, 40).unwrap(), "curve");
}

#[test]
fn som_prototypes_land_inside_the_data() {
    let pts: Vec<f64> = (0..40).flat_map(|i| [(i % 2) as f64, (i % 2) as f64 * 0.5]).collect();
    let p = som_fit(pts, 1, 2, 20, 3).unwrap();
    assert_eq!(p.len(), 4);
    assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn roc_report_is_json_with_svg() {
    let r: serde_json::Value = serde_json::from_str(&roc_report(vec![0.9, 0.1, 0.8, 0.2], vec![1, 0, 1, 0]).unwrap()).unwrap();
    assert_eq!(r["auc"], 1.0);
    assert!(r["svg"].as_str().unwrap().starts_with("<svg"));
}

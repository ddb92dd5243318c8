use invflow_web::{bony_json, outline_json, planar_ids, star_json, trajectory_json};

#[test]
fn only_planar_entries_are_offered() {
    let ids = planar_ids();
    assert!(ids.contains(&"d-set"));
    assert!(ids.contains(&"example-3-3"));
    assert!(!ids.contains(&"example-3-1"));
    assert!(!ids.contains(&"linear-periodic"));
    assert!(outline_json("example-3-1", 10).is_err());
}

#[test]
fn outline_samples_the_boundary() {
    let v = outline_json("rotation-disk", 200).unwrap();
    let b = v["boundary"].as_array().unwrap();
    assert!(b.len() >= 200);
    for p in b {
        let (x, y) = (p[0].as_f64().unwrap(), p[1].as_f64().unwrap());
        assert!(((x * x + y * y).sqrt() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn star_map_on_the_disk_is_the_identity_up_to_radius() {
    let v = star_json("rotation-disk", 0.0, 0.0, 4, 8).unwrap();
    assert_eq!(v["verdict"], "Strict");
    let curves = v["psi_curves"].as_array().unwrap();
    assert_eq!(curves.len(), 12);
    // Outermost ring lies on the unit circle.
    for p in curves[3].as_array().unwrap() {
        let (x, y) = (p[0].as_f64().unwrap(), p[1].as_f64().unwrap());
        assert!(((x * x + y * y).sqrt() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn star_on_a_set_reports_a_witness() {
    let v = star_json("a-set", 0.0, 0.0, 3, 4).unwrap();
    assert_eq!(v["verdict"], "StarNotStrict");
    assert!(v["witness"].is_array());
    assert!(v["psi_curves"].as_array().unwrap().is_empty());
    assert!(star_json("a-set", 50.0, 50.0, 3, 4).is_err());
}

#[test]
fn bony_cone_at_the_g2_corner_has_a_positive_margin() {
    let v = bony_json("g2", 0.7, 0.7).unwrap();
    let u = &v["point"];
    assert!((u[0].as_f64().unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9, "{u}");
    let worst = v["worst_margin"].as_f64().unwrap();
    assert!(v["normals"].as_array().unwrap().len() > 1);
    assert!(worst > 0.0, "worst {worst}");
}

#[test]
fn trajectory_escapes_example_3_3_from_the_origin() {
    let v = trajectory_json("example-3-3", 0.0, 0.0, 0.0).unwrap();
    assert!(v["escape"].is_object(), "{v}");
    let v = trajectory_json("rotation-disk", 0.5, 0.0, 6.3).unwrap();
    assert!(v["escape"].is_null());
    let s = v["states"].as_array().unwrap();
    let last = s.last().unwrap();
    let r = (last[0].as_f64().unwrap().powi(2) + last[1].as_f64().unwrap().powi(2)).sqrt();
    assert!((r - 0.5).abs() < 1e-6);
}

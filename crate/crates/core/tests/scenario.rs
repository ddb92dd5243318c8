use invflow::flow::Smoothness;
use invflow::scenario::Scenario;
use invflow::{point, Error, Membership};

fn line_of(src: &str) -> usize {
    match Scenario::parse(src, "s.toml") {
        Err(Error::Scenario { file, line, .. }) => {
            assert_eq!(file, "s.toml");
            line
        }
        Err(e) => panic!("wrong error {e}"),
        Ok(_) => panic!("parsed"),
    }
}

#[test]
fn ball_scenario() {
    let sc = Scenario::parse(
        r#"
name = "spiral"
seed = 7

[domain]
kind = "ball"
center = [0.0, 0.0]
radius = 2.0

[field]
f = ["-x2 - 0.1*x1", "x1 - 0.1*x2"]

[bounding]
kind = "halfspace"

[params]
samples = 50
"#,
        "spiral.toml",
    )
    .unwrap();
    assert_eq!(sc.name, "spiral");
    assert_eq!(sc.grid().n_boundary, 50);
    assert_eq!(sc.grid().seed, 7);
    assert!(sc.field.autonomous);
    let v = sc.field.eval(0.0, &point(&[1.0, 2.0]));
    assert!((v - point(&[-2.1, 0.8])).norm() < 1e-15);
    assert_eq!(sc.domain.membership(&point(&[1.9, 0.0])), Membership::Interior);
    assert!(sc.family.is_some());
}

#[test]
fn sublevel_and_star_radial() {
    let sc = Scenario::parse(
        r#"
[domain]
kind = "sublevel"
v = "x1^2 + x2^2"
level = 1.0
center = [0.0, 0.0]
lo = [-1.5, -1.5]
hi = [1.5, 1.5]
[field]
f = ["-x1", "-x2 + sin(2*pi*t)"]
period = 0.5
smoothness = "lipschitz"
[bounding]
kind = "sublevel"
"#,
        "a",
    )
    .unwrap();
    assert!(!sc.field.autonomous && sc.field.period == 0.5);
    assert!(sc.to_problem().sublevel().is_some());

    let sc = Scenario::parse(
        r#"
[domain]
kind = "star-radial"
r = "1 + 0.2*x1"
center = [0.0, 0.0]
lo = [-2.0, -2.0]
hi = [2.0, 2.0]
[field]
f = ["0", "0"]
smoothness = "continuous"
"#,
        "b",
    )
    .unwrap();
    assert_eq!(sc.field.smoothness, Smoothness::ContinuousOnly);
    assert_eq!(sc.domain.membership(&point(&[1.1, 0.0])), Membership::Interior);
    assert_eq!(sc.domain.membership(&point(&[-0.9, 0.0])), Membership::Exterior);
}

#[test]
fn errors_point_at_lines() {
    // bad expression on line 6
    assert_eq!(line_of("[domain]\nkind = \"ball\"\ncenter = [0.0]\nradius = 1.0\n[field]\nf = [\"x1 +\"]\n"), 6);
    // unknown kind on line 2
    assert_eq!(line_of("[domain]\nkind = \"torus\"\n[field]\nf = [\"1\"]\n"), 2);
    // wrong component count on line 5
    assert_eq!(line_of("[domain]\nkind = \"g1\"\n\n[field]\nf = [\"1\"]\n"), 5);
    // unknown key is a syntax-level error
    assert_eq!(line_of("[domain]\nkind = \"g1\"\ncolour = 3\n[field]\nf = [\"1\", \"2\"]\n"), 3);
    // x3 in the plane
    assert_eq!(line_of("[domain]\nkind = \"g2\"\n[field]\nf = [\"x3\", \"1\"]\n"), 4);
    // missing radius reported at the kind line
    assert_eq!(line_of("[domain]\nkind = \"ball\"\ncenter = [0.0]\n[field]\nf = [\"1\"]\n"), 2);
    // sublevel family on a named set
    assert_eq!(line_of("[domain]\nkind = \"g1\"\n[field]\nf = [\"1\", \"2\"]\n[bounding]\nkind = \"sublevel\"\n"), 6);
    // nonpositive period
    assert_eq!(line_of("[domain]\nkind = \"g1\"\n[field]\nf = [\"1\", \"2\"]\nperiod = 0.0\n"), 5);
}

#[test]
fn missing_file_is_io_error() {
    assert!(matches!(Scenario::load(std::path::Path::new("/nonexistent/x.toml")), Err(Error::Io(_))));
}

use std::time::{Duration, Instant};

use invflow::gallery::{run, scenario, Density, GALLERY_IDS};

#[test]
fn every_entry_meets_its_checklist() {
    for id in GALLERY_IDS {
        let start = Instant::now();
        let r = run(id, Density::Base).unwrap();
        let took = start.elapsed();
        for c in &r.checks {
            eprintln!("{id} | {} | {} | {}", c.label, c.observed, if c.pass { "ok" } else { "FAIL" });
        }
        eprintln!("{id}: {took:?}");
        assert!(r.passed(), "{id}: {:?}", r.failures().collect::<Vec<_>>());
        assert!(took < Duration::from_secs(60), "{id} took {took:?}");
    }
}

#[test]
fn scenarios_parse() {
    for id in GALLERY_IDS {
        let sc = scenario(id).unwrap();
        assert_eq!(sc.name, id);
    }
    assert!(scenario("nope").is_err());
}

#[test]
fn report_artifacts() {
    use invflow::report::{phase_svg, write_margins_csv, Report};
    let r = run("example-3-3", Density::Base).unwrap();
    let mut doc = Report::new("example-3-3");
    for c in &r.reports {
        doc.condition(c);
    }
    doc.applicability(r.applicability.as_ref().unwrap()).checklist(&r.checks);
    let text = doc.render();
    assert!(text.contains("condition bound-weak") && text.contains("[ok] invariance"));

    let mut a = Vec::new();
    let mut b = Vec::new();
    write_margins_csv(&r.reports, &mut a).unwrap();
    let again = run("example-3-3", Density::Base).unwrap();
    write_margins_csv(&again.reports, &mut b).unwrap();
    assert_eq!(a, b);
    assert!(String::from_utf8(a).unwrap().starts_with("condition,patch_id,t,x_1,x_2,margin\n"));

    let svg = phase_svg(&r.scenario.domain, &r.trajectories, 400).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polyline"));
    let one = scenario("linear-periodic").unwrap();
    assert!(phase_svg(&one.domain, &[], 100).is_err());
}

#[test]
fn doubling_never_certifies_a_violation() {
    for id in GALLERY_IDS {
        let base = run(id, Density::Base).unwrap();
        let dense = run(id, Density::Doubled).unwrap();
        for (a, b) in base.checks.iter().zip(&dense.checks) {
            if let (Some(va), Some(vb)) = (&a.verdict, &b.verdict) {
                assert!(!(va.is_violated() && vb.is_certified()), "{id}: {}", a.label);
            }
        }
    }
}

//! Plain-text verdict documents, margin tables and SVG phase portraits.

use std::fmt::Write as _;
use std::io;

use crate::conditions::{ConditionReport, TheoremVerdict};
use crate::error::{Error, Result};
use crate::flow::Trajectory;
use crate::gallery::Check;
use crate::geometry::Domain;
use crate::types::Point;

/// A titled list of sections, rendered as plain text.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub title: String,
    sections: Vec<(String, Vec<String>)>,
}

impl Report {
    pub fn new(title: impl Into<String>) -> Self {
        Report {
            title: title.into(),
            sections: Vec::new(),
        }
    }

    pub fn section(&mut self, heading: impl Into<String>, lines: Vec<String>) -> &mut Self {
        self.sections.push((heading.into(), lines));
        self
    }

    pub fn condition(&mut self, rep: &ConditionReport) -> &mut Self {
        let mut lines = vec![
            format!("verdict: {}", rep.verdict),
            format!("samples: {} boundary x {} times", rep.n_samples, rep.n_times),
            format!("worst margin: {:.6e}", rep.worst_margin),
        ];
        if let Some(w) = &rep.worst {
            lines.push(format!("worst at {} (patch {}, t = {:.4})", fmt_point(&w.point), w.patch_id, w.t));
        }
        lines.push(format!("violations: {}", rep.violations.len()));
        lines.extend(rep.notes.iter().map(|n| format!("note: {n}")));
        self.section(format!("condition {}", rep.kind), lines)
    }

    pub fn applicability(&mut self, v: &TheoremVerdict) -> &mut Self {
        let ids: Vec<&str> = v.applicable.iter().map(|t| t.id()).collect();
        let mut lines = vec![format!(
            "applicable: {}",
            if ids.is_empty() { "none".to_string() } else { ids.join(", ") }
        )];
        for c in &v.trace {
            lines.push(format!("{:<15} {:<13} {}: {}", c.theorem.id(), c.status.to_string(), c.hypothesis, c.detail));
        }
        lines.extend(v.notes.iter().map(|n| format!("note: {n}")));
        self.section("theorem applicability", lines)
    }

    pub fn checklist(&mut self, checks: &[Check]) -> &mut Self {
        let lines = checks
            .iter()
            .map(|c| {
                format!(
                    "[{}] {}: expected {}; observed {}",
                    if c.pass { "ok" } else { "FAIL" },
                    c.label,
                    c.expected,
                    c.observed
                )
            })
            .collect();
        self.section("checklist", lines)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.title);
        let _ = writeln!(s, "{}", "=".repeat(self.title.chars().count()));
        for (h, lines) in &self.sections {
            let _ = writeln!(s, "\n{h}");
            let _ = writeln!(s, "{}", "-".repeat(h.chars().count()));
            for l in lines {
                let _ = writeln!(s, "{l}");
            }
        }
        s
    }
}

pub(crate) fn fmt_point(p: &Point) -> String {
    let parts: Vec<String> = p.iter().map(|v| format!("{v:.6}")).collect();
    format!("({})", parts.join(", "))
}

/// All margins of several reports in one table, tagged by condition label.
pub fn write_margins_csv<W: io::Write>(reports: &[ConditionReport], mut w: W) -> io::Result<()> {
    let n = reports
        .iter()
        .find_map(|r| r.margins.first())
        .map_or(0, |m| m.point.len());
    let mut header = String::from("condition,patch_id,t");
    for i in 1..=n {
        let _ = write!(header, ",x_{i}");
    }
    writeln!(w, "{header},margin")?;
    for r in reports {
        for m in &r.margins {
            let mut line = format!("{},{},{:.12e}", r.kind.label(), m.patch_id, m.t);
            for v in m.point.iter() {
                let _ = write!(line, ",{v:.12e}");
            }
            writeln!(w, "{line},{:.12e}", m.margin)?;
        }
    }
    Ok(())
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Phase portrait of a planar domain: boundary samples, trajectories, exit points.
pub fn phase_svg(domain: &Domain, trajectories: &[Trajectory], size: u32) -> Result<String> {
    if domain.dim() != 2 {
        return Err(Error::InvalidArgument("phase portraits need dimension 2".into()));
    }
    let bb = domain.bbox();
    let (x0, y0) = (bb.lo[0], bb.lo[1]);
    let span = (bb.hi[0] - x0).max(bb.hi[1] - y0);
    let px = size as f64;
    let map = |p: &Point| (((p[0] - x0) / span) * px, px - ((p[1] - y0) / span) * px);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    for u in domain.sample_boundary(600, 0)? {
        let (a, b) = map(&u.point);
        let _ = writeln!(s, r##"<circle cx="{a:.2}" cy="{b:.2}" r="1.2" fill="#444444"/>"##);
    }
    for (k, tr) in trajectories.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = tr
            .states
            .iter()
            .map(|p| {
                let (a, b) = map(p);
                format!("{a:.2},{b:.2}")
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
        if let Some(first) = tr.states.first() {
            let (a, b) = map(first);
            let _ = writeln!(s, r#"<circle cx="{a:.2}" cy="{b:.2}" r="3" fill="{colour}"/>"#);
        }
        if let Some(e) = &tr.escape {
            let (a, b) = map(&e.u_exit);
            let _ = writeln!(
                s,
                r#"<circle cx="{a:.2}" cy="{b:.2}" r="5" fill="none" stroke="{colour}" stroke-width="2"/>"#
            );
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

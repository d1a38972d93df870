use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Scenario;
use crate::builder::FoliationChart;
use crate::error::{Error, Result};
use crate::linalg::RVec;

/// One leaf, or the reason it was skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafRecord {
    pub id: usize,
    /// Chart coordinates of the leaf, `(re, im)` pairs.
    pub y: Option<RVec>,
    /// `σ(y)`, the point of the leaf nearest the origin.
    pub base: Option<RVec>,
    /// Points of the leaf, `anchor + t k` for the kernel directions `k`
    /// and `t ∈ {-step, 0, step}`.
    pub points: Vec<RVec>,
    pub error: Option<String>,
}

impl LeafRecord {
    pub fn is_skip(&self) -> bool {
        self.error.is_some()
    }
}

/// Leaves through `count` points drawn from the inner part of `U`.
pub fn emit_leaves(scenario: &Scenario, count: usize, step: f64) -> Result<Vec<LeafRecord>> {
    let spec = scenario
        .builder
        .clone()
        .ok_or_else(|| Error::Scenario(format!("scenario `{}` has no builder data", scenario.name)))?;
    let chart = FoliationChart::new(spec, scenario.u.clone(), scenario.solver.clone())?;
    let inner = scenario.u.shrink(0.2);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut records = Vec::with_capacity(count);
    for id in 0..count {
        let x = inner.sample(&mut rng);
        let record = match chart.leaf_through(&x) {
            Ok(leaf) => {
                let k = leaf.kernel.ncols();
                let mut points = vec![leaf.point(&x, &RVec::zeros(k))];
                for j in 0..k {
                    for t in [-step, step] {
                        let mut c = RVec::zeros(k);
                        c[j] = t;
                        points.push(leaf.point(&x, &c));
                    }
                }
                LeafRecord {
                    id,
                    y: Some(leaf.y),
                    base: Some(leaf.base),
                    points,
                    error: None,
                }
            }
            Err(e) => LeafRecord {
                id,
                y: None,
                base: None,
                points: Vec::new(),
                error: Some(e.to_string()),
            },
        };
        records.push(record);
    }
    Ok(records)
}

/// Header plus one row per leaf point; skipped leaves get one row with the
/// numeric columns empty and the error in `status`.
pub fn write_leaves_csv<W: Write>(out: W, scenario: &Scenario, records: &[LeafRecord]) -> csv::Result<()> {
    let (m, n) = (scenario.m, scenario.n);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["leaf_id".to_string(), "status".to_string()];
    for a in 0..n {
        header.push(format!("y{}_re", a + 1));
        header.push(format!("y{}_im", a + 1));
    }
    header.extend((1..=m).map(|i| format!("base{i}")));
    header.extend((1..=m).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    for r in records {
        match (&r.y, &r.base, &r.error) {
            (Some(y), Some(base), None) => {
                for p in &r.points {
                    let mut row = vec![r.id.to_string(), "ok".to_string()];
                    row.extend(y.iter().chain(base.iter()).chain(p.iter()).map(|v| format!("{v:e}")));
                    w.write_record(&row)?;
                }
            }
            _ => {
                let mut row = vec![r.id.to_string(), format!("skip: {}", r.error.as_deref().unwrap_or("skipped"))];
                row.resize(header.len(), String::new());
                w.write_record(&row)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{builtin, Overrides};

    #[test]
    fn linear_leaves_are_parallel() {
        let s = builtin("linear", &Overrides::default()).unwrap();
        let leaves = emit_leaves(&s, 4, 0.1).unwrap();
        assert!(leaves.iter().all(|l| !l.is_skip()));
        // leaf directions: differences of points along the first kernel direction
        let dir = |l: &LeafRecord| (&l.points[2] - &l.points[1]).normalize();
        let d0 = dir(&leaves[0]);
        for l in &leaves[1..] {
            let d = dir(l);
            assert!((d.dot(&d0).abs() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn hopf_leaves_contain_origin() {
        let s = builtin("hopf", &Overrides::default()).unwrap();
        let leaves = emit_leaves(&s, 3, 0.1).unwrap();
        for l in &leaves {
            assert!(l.base.as_ref().unwrap().norm() <= 1e-12);
        }
    }

    #[test]
    fn csv_layout() {
        let s = builtin("jacobi-r3", &Overrides::default()).unwrap();
        let leaves = emit_leaves(&s, 2, 0.1).unwrap();
        let mut buf = Vec::new();
        write_leaves_csv(&mut buf, &s, &leaves).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "leaf_id,status,y1_re,y1_im,base1,base2,base3,x1,x2,x3");
        let rows: Vec<_> = csv::Reader::from_reader(text.as_bytes()).records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 2 * 3);
        assert!(rows.iter().all(|r| r.len() == 10 && &r[1] == "ok"));
        let x1: f64 = rows[0][7].parse().unwrap();
        assert!(x1.is_finite());
    }

    #[test]
    fn skip_rows_keep_column_count() {
        let s = builtin("jacobi-r3", &Overrides::default()).unwrap();
        let rec = LeafRecord {
            id: 0,
            y: None,
            base: None,
            points: vec![],
            error: Some("no convergence, here".into()),
        };
        let mut buf = Vec::new();
        write_leaves_csv(&mut buf, &s, &[rec]).unwrap();
        let row = csv::Reader::from_reader(&buf[..]).records().next().unwrap().unwrap();
        assert_eq!(row.len(), 10);
        assert_eq!(&row[1], "skip: no convergence, here");
    }
}

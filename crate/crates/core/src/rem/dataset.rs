use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::event::Dyad;
use crate::error::{Error, Result};

/// Covariates of one observed event and one sampled non-event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseControlPair {
    pub event_index: usize,
    pub case: Vec<f64>,
    pub control: Vec<f64>,
    /// (case dyad, control dyad) when known; not part of the CSV format.
    #[serde(skip)]
    pub dyads: Option<(Dyad, Dyad)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CaseControlDataset {
    q: usize,
    pairs: Vec<CaseControlPair>,
}

impl CaseControlDataset {
    pub fn new(q: usize, pairs: Vec<CaseControlPair>) -> Result<Self> {
        if q == 0 {
            return Err(Error::config("covariate count must be at least 1"));
        }
        for p in &pairs {
            for v in [&p.case, &p.control] {
                if v.len() != q {
                    return Err(Error::Dimension {
                        expected: q,
                        got: v.len(),
                    });
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidEvent {
                        index: p.event_index,
                        message: "non-finite covariate".into(),
                    });
                }
            }
        }
        Ok(CaseControlDataset { q, pairs })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn pairs(&self) -> &[CaseControlPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// New dataset made of the pairs at `indices` (repeats allowed).
    pub fn select(&self, indices: &[usize]) -> Self {
        CaseControlDataset {
            q: self.q,
            pairs: indices.iter().map(|&i| self.pairs[i].clone()).collect(),
        }
    }

    /// CSV `event_index,role,x1..xq`: one `case` row per event followed by
    /// its `control` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["event_index".to_string(), "role".to_string()];
        header.extend((1..=self.q).map(|k| format!("x{k}")));
        wtr.write_record(&header)?;
        let mut prev_case: Option<(usize, &[f64])> = None;
        let row = |idx: usize, role: &str, xs: &[f64]| {
            let mut r = vec![idx.to_string(), role.to_string()];
            r.extend(xs.iter().map(f64::to_string));
            r
        };
        for p in &self.pairs {
            if prev_case != Some((p.event_index, p.case.as_slice())) {
                wtr.write_record(row(p.event_index, "case", &p.case))?;
                prev_case = Some((p.event_index, p.case.as_slice()));
            }
            wtr.write_record(row(p.event_index, "control", &p.control))?;
        }
        wtr.flush().map_err(|e| Error::io("<pairs csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers()?.clone();
        if header.len() < 3 || &header[0] != "event_index" || &header[1] != "role" {
            return Err(Error::parse(
                "pairs header",
                "expected event_index,role,x1..xq",
            ));
        }
        let q = header.len() - 2;
        let mut pairs = Vec::new();
        let mut case: Option<(usize, Vec<f64>)> = None;
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let ctx = || format!("pairs row {}", line + 2);
            let idx: usize = rec[0]
                .trim()
                .parse()
                .map_err(|_| Error::parse(ctx(), "bad event_index"))?;
            let xs = rec
                .iter()
                .skip(2)
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::parse(ctx(), "bad covariate value"))?;
            match rec[1].trim() {
                "case" => case = Some((idx, xs)),
                "control" => match &case {
                    Some((ci, cx)) if *ci == idx => pairs.push(CaseControlPair {
                        event_index: idx,
                        case: cx.clone(),
                        control: xs,
                        dyads: None,
                    }),
                    _ => return Err(Error::parse(ctx(), "control row without its case row")),
                },
                other => return Err(Error::parse(ctx(), format!("unknown role '{other}'"))),
            }
        }
        Self::new(q, pairs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(i: usize, case: Vec<f64>, control: Vec<f64>) -> CaseControlPair {
        CaseControlPair {
            event_index: i,
            case,
            control,
            dyads: None,
        }
    }

    #[test]
    fn csv_groups_controls_under_case() {
        let ds = CaseControlDataset::new(
            2,
            vec![
                pair(0, vec![0.5, 1.0], vec![0.25, 0.125]),
                pair(0, vec![0.5, 1.0], vec![0.75, 0.1]),
                pair(1, vec![0.3, 0.2], vec![0.1, 0.9]),
            ],
        )
        .unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), "event_index,role,x1,x2");
        assert_eq!(text.lines().filter(|l| l.contains(",case,")).count(), 2);
        assert_eq!(CaseControlDataset::read_csv(buf.as_slice()).unwrap(), ds);
    }

    #[test]
    fn rejects_orphan_control() {
        let text = "event_index,role,x1\n0,control,0.5\n";
        assert!(CaseControlDataset::read_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn rejects_ragged_pairs() {
        assert!(CaseControlDataset::new(2, vec![pair(0, vec![1.0], vec![1.0, 2.0])]).is_err());
    }
}

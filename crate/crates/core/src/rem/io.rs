//! CSV readers and writers for event logs and node tables.

use std::io::{Read, Write};

use super::covariates::NodeTable;
use super::event::{Event, EventSequence, NodeId};
use crate::error::{Error, Result};

fn parse_field<T: std::str::FromStr>(raw: &str, ctx: &dyn Fn() -> String, what: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| Error::parse(ctx(), format!("bad {what} '{raw}'")))
}

/// Reads `sender,receiver,time[,x1..xq]`. The optional columns are kept as
/// the sequence's recorded covariates.
pub fn read_events<R: Read>(r: R, node_count: Option<usize>) -> Result<EventSequence> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names.len() < 3 || names[..3] != ["sender", "receiver", "time"] {
        return Err(Error::parse(
            "events header",
            "expected sender,receiver,time[,x1..xq]",
        ));
    }
    let extra = names.len() - 3;
    let mut events = Vec::new();
    let mut recorded = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let ctx = || format!("events row {}", line + 2);
        let s: NodeId = parse_field(&rec[0], &ctx, "sender")?;
        let r: NodeId = parse_field(&rec[1], &ctx, "receiver")?;
        let t: f64 = parse_field(&rec[2], &ctx, "time")?;
        let e = Event::new(s, r, t).map_err(|e| Error::parse(ctx(), e.to_string()))?;
        events.push(e);
        if extra > 0 {
            let xs = (3..rec.len())
                .map(|j| parse_field::<f64>(&rec[j], &ctx, "covariate"))
                .collect::<Result<Vec<_>>>()?;
            recorded.push(xs);
        }
    }
    let seq = match node_count {
        Some(n) => EventSequence::new(events, n)?,
        None => EventSequence::from_events(events)?,
    };
    if extra > 0 {
        seq.with_recorded(recorded)
    } else {
        Ok(seq)
    }
}

pub fn write_events<W: Write>(seq: &EventSequence, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let q = seq.recorded().and_then(|r| r.first()).map_or(0, Vec::len);
    let mut header: Vec<String> = ["sender", "receiver", "time"].map(String::from).to_vec();
    header.extend((1..=q).map(|k| format!("x{k}")));
    wtr.write_record(&header)?;
    for (i, e) in seq.events().iter().enumerate() {
        let mut row = vec![e.sender.to_string(), e.receiver.to_string(), e.time.to_string()];
        if let Some(rec) = seq.recorded() {
            row.extend(rec[i].iter().map(f64::to_string));
        }
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<events csv>", e))?;
    Ok(())
}

/// Node table CSV: `node,entry_time,sender_0..,receiver_0..`.
pub fn write_nodes<W: Write>(nodes: &NodeTable, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["node".to_string(), "entry_time".to_string()];
    header.extend((0..nodes.sender_width()).map(|j| format!("sender_{j}")));
    header.extend((0..nodes.receiver_width()).map(|j| format!("receiver_{j}")));
    wtr.write_record(&header)?;
    for n in 0..nodes.node_count() {
        let mut row = vec![n.to_string(), nodes.entry_times[n].to_string()];
        row.extend(nodes.sender_attrs[n].iter().map(f64::to_string));
        row.extend(nodes.receiver_attrs[n].iter().map(f64::to_string));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<nodes csv>", e))?;
    Ok(())
}

pub fn read_nodes<R: Read>(r: R) -> Result<NodeTable> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names.len() < 2 || names[..2] != ["node", "entry_time"] {
        return Err(Error::parse("nodes header", "expected node,entry_time,..."));
    }
    let ws = names.iter().filter(|n| n.starts_with("sender_")).count();
    let wr = names.iter().filter(|n| n.starts_with("receiver_")).count();
    if ws + wr + 2 != names.len() {
        return Err(Error::parse("nodes header", "unexpected column"));
    }
    let mut rows: Vec<(usize, f64, Vec<f64>, Vec<f64>)> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let ctx = || format!("nodes row {}", line + 2);
        let node: usize = parse_field(&rec[0], &ctx, "node")?;
        let entry: f64 = parse_field(&rec[1], &ctx, "entry_time")?;
        let vals = (2..rec.len())
            .map(|j| parse_field::<f64>(&rec[j], &ctx, "attribute"))
            .collect::<Result<Vec<_>>>()?;
        rows.push((node, entry, vals[..ws].to_vec(), vals[ws..].to_vec()));
    }
    rows.sort_by_key(|r| r.0);
    if rows.iter().enumerate().any(|(i, r)| r.0 != i) {
        return Err(Error::parse("nodes", "node ids must be exactly 0..n-1"));
    }
    let (mut s, mut r, mut entry) = (Vec::new(), Vec::new(), Vec::new());
    for (_, e, sa, ra) in rows {
        entry.push(e);
        s.push(sa);
        r.push(ra);
    }
    NodeTable::new(s, r, entry)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn events_with_and_without_covariates() {
        let text = "sender,receiver,time\n0,1,0.5\n2,0,1.5\n";
        let seq = read_events(text.as_bytes(), None).unwrap();
        assert_eq!(seq.len(), 2);
        assert_eq!(seq.node_count(), 3);
        assert!(seq.recorded().is_none());

        let text = "sender,receiver,time,x1,x2\n0,1,0.5,0.1,0.2\n";
        let seq = read_events(text.as_bytes(), Some(4)).unwrap();
        assert_eq!(seq.recorded().unwrap()[0], vec![0.1, 0.2]);
        let mut out = Vec::new();
        write_events(&seq, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }

    #[test]
    fn bad_rows_are_reported() {
        let err = read_events("sender,receiver,time\n0,0,1\n".as_bytes(), None).unwrap_err();
        assert!(err.to_string().contains("row 2"));
        assert!(read_events("a,b,c\n".as_bytes(), None).is_err());
    }

    #[test]
    fn nodes_round_trip() {
        let nodes = NodeTable::new(
            vec![vec![0.25], vec![0.5]],
            vec![vec![0.125, 1.0], vec![0.0, 0.75]],
            vec![0.0, 3.0],
        )
        .unwrap();
        let mut out = Vec::new();
        write_nodes(&nodes, &mut out).unwrap();
        assert_eq!(read_nodes(out.as_slice()).unwrap(), nodes);
    }
}

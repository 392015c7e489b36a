//! Edge-list and CAIDA AS-relationship readers.
//!
//! Both formats skip blank lines and lines starting with `#`, and accept LF or
//! CRLF endings. Node labels are the numeric tokens from the file; internal ids
//! are assigned in ascending label order.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use super::{EdgeStats, Topology};
use crate::error::{Error, Result};

/// A parsed graph plus the edges that were dropped on the way in.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub topology: Topology,
    pub stats: EdgeStats,
}

/// Reads whitespace-separated `u v` pairs, one edge per line.
pub fn load_edge_list<R: BufRead>(reader: R) -> Result<Loaded> {
    read_pairs(reader, |line| {
        let mut tokens = line.split_whitespace();
        let (Some(u), Some(v), None) = (tokens.next(), tokens.next(), tokens.next()) else {
            return Err(format!("expected two node ids, got {line:?}"));
        };
        Ok((parse_label(u)?, parse_label(v)?))
    })
}

/// Reads CAIDA `as1|as2|rel[|...]` lines. The relationship field is ignored
/// and edges are undirected, so `1|2|0` and `2|1|-1` are the same edge.
pub fn load_caida<R: BufRead>(reader: R) -> Result<Loaded> {
    read_pairs(reader, |line| {
        let mut fields = line.split('|');
        match (fields.next(), fields.next()) {
            (Some(a), Some(b)) if !b.trim().is_empty() => Ok((parse_label(a.trim())?, parse_label(b.trim())?)),
            _ => Err(format!("expected 'as1|as2|rel', got {line:?}")),
        }
    })
}

/// Writes `g` in the edge-list format, preceded by a `#` summary line.
pub fn write_edge_list<W: Write>(g: &Topology, mut out: W) -> Result<()> {
    writeln!(out, "# nodes {} edges {}", g.node_count(), g.edge_count())?;
    for (u, v) in g.edges() {
        writeln!(out, "{} {}", g.label(u), g.label(v))?;
    }
    out.flush()?;
    Ok(())
}

fn parse_label(token: &str) -> Result<u64, String> {
    token.parse::<u64>().map_err(|_| format!("non-numeric node id {token:?}"))
}

fn read_pairs<R, F>(reader: R, mut parse: F) -> Result<Loaded>
where
    R: BufRead,
    F: FnMut(&str) -> Result<(u64, u64), String>,
{
    let mut raw = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let pair = parse(line).map_err(|message| Error::Parse { line: line_no, message })?;
        raw.push(pair);
    }

    let mut ids: BTreeMap<u64, usize> = raw.iter().flat_map(|&(u, v)| [(u, 0), (v, 0)]).collect();
    for (i, id) in ids.values_mut().enumerate() {
        *id = i;
    }
    let labels: Vec<u64> = ids.keys().copied().collect();
    if labels.len() < 2 {
        return Err(Error::DegenerateGraph(format!("input defines {} node(s)", labels.len())));
    }
    let (topology, stats) = Topology::from_edges(labels, raw.iter().map(|(u, v)| (ids[u], ids[v])))?;
    Ok(Loaded { topology, stats })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_list_path() {
        let loaded = load_edge_list("0 1\n1 2".as_bytes()).unwrap();
        let g = loaded.topology;
        assert_eq!((g.node_count(), g.edge_count()), (3, 2));
        assert!(g.has_edge(0, 1) && g.has_edge(1, 2) && !g.has_edge(0, 2));
    }

    #[test]
    fn edge_list_drops_and_counts() {
        let loaded = load_edge_list("0 1\n1 0\n0 0".as_bytes()).unwrap();
        assert_eq!(loaded.topology.edge_count(), 1);
        assert_eq!(loaded.stats, EdgeStats { duplicates: 1, self_loops: 1 });
    }

    #[test]
    fn edge_list_parse_error_has_line() {
        assert_eq!(
            load_edge_list("a b".as_bytes()).unwrap_err(),
            Error::Parse { line: 1, message: "non-numeric node id \"a\"".into() }
        );
        match load_edge_list("# header\n\n1 2\n3\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn edge_list_comments_crlf_and_labels() {
        let g = load_edge_list("# c\r\n100 7\r\n\r\n7 42\r\n".as_bytes()).unwrap().topology;
        assert_eq!(g.labels(), &[7, 42, 100]);
        assert!(g.has_edge(0, 2) && g.has_edge(0, 1));
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(load_edge_list("".as_bytes()), Err(Error::DegenerateGraph(_))));
        assert!(matches!(load_edge_list("5 5".as_bytes()), Err(Error::DegenerateGraph(_))));
    }

    #[test]
    fn caida_basic() {
        let g = load_caida("# comment\n1|2|-1".as_bytes()).unwrap().topology;
        assert_eq!(g.labels(), &[1, 2]);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn caida_merges_orientations() {
        let loaded = load_caida("1|2|0\n2|1|-1".as_bytes()).unwrap();
        assert_eq!(loaded.topology.edge_count(), 1);
        assert_eq!(loaded.stats.duplicates, 1);
    }

    #[test]
    fn caida_extra_fields_and_errors() {
        let g = load_caida("3356|174|0|bgp\r\n174|2914|-1|mlp\r\n".as_bytes()).unwrap().topology;
        assert_eq!((g.node_count(), g.edge_count()), (3, 2));
        assert!(matches!(load_caida("1|".as_bytes()), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(load_caida("1 2".as_bytes()), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(load_caida("1|x|0".as_bytes()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn write_then_read_round_trip() {
        let g = Topology::from_edges(vec![5, 9, 12], [(0, 1), (1, 2)]).unwrap().0;
        let mut buf = Vec::new();
        write_edge_list(&g, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "# nodes 3 edges 2\n5 9\n9 12\n");
        assert_eq!(load_edge_list(buf.as_slice()).unwrap().topology, g);
    }
}

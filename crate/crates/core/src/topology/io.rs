//! Line format for topologies.
//!
//! ```text
//! # comment
//! places <n>
//! edge <a> <b>
//! nbhd <from> <to> : <p> <p> ...
//! map <place> <antenna>
//! ```
//!
//! `nbhd` lines are per directed edge. `map` lines are optional; places
//! without one keep their own index as antenna. Ids are 0-based.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use super::{build_custom, RpnTopology};
use crate::error::{Error, Result};

pub fn write_topology<W: Write>(mut out: W, t: &RpnTopology) -> Result<()> {
    writeln!(out, "# rpn-mimo topology v1")?;
    writeln!(out, "places {}", t.n_places)?;
    for (a, b) in &t.edges {
        writeln!(out, "edge {a} {b}")?;
    }
    for ((from, to), n) in &t.edge_neighbourhood {
        let members: Vec<String> = n.iter().map(|p| p.to_string()).collect();
        writeln!(out, "nbhd {from} {to} : {}", members.join(" "))?;
    }
    for (place, antenna) in t.place_to_antenna.iter().enumerate() {
        if place != *antenna {
            writeln!(out, "map {place} {antenna}")?;
        }
    }
    Ok(())
}

fn ids(tokens: &[&str], line: usize) -> Result<Vec<usize>> {
    tokens
        .iter()
        .map(|t| {
            t.parse::<usize>().map_err(|_| Error::Parse {
                line,
                message: format!("expected a place id, found {t:?}"),
            })
        })
        .collect()
}

pub fn read_topology<R: BufRead>(input: R) -> Result<RpnTopology> {
    let mut n_places = None;
    let mut edges = Vec::new();
    let mut neighbourhoods = BTreeMap::new();
    let mut mapping = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        let bad = |message: &str| Error::Parse {
            line: line_no,
            message: message.to_string(),
        };
        match tokens[0] {
            "places" if tokens.len() == 2 => n_places = Some(ids(&tokens[1..], line_no)?[0]),
            "edge" if tokens.len() == 3 => {
                let v = ids(&tokens[1..], line_no)?;
                edges.push((v[0], v[1]));
            }
            "nbhd" if tokens.len() >= 5 && tokens[3] == ":" => {
                let ends = ids(&tokens[1..3], line_no)?;
                let members = ids(&tokens[4..], line_no)?;
                neighbourhoods.insert((ends[0], ends[1]), members);
            }
            "map" if tokens.len() == 3 => {
                let v = ids(&tokens[1..], line_no)?;
                mapping.push((v[0], v[1]));
            }
            _ => return Err(bad(&format!("unrecognised line {trimmed:?}"))),
        }
    }
    let n = n_places.ok_or(Error::Parse {
        line: 0,
        message: "missing places line".into(),
    })?;
    let t = build_custom(n, &edges, neighbourhoods)?;
    if mapping.is_empty() {
        return Ok(t);
    }
    let mut place_to_antenna: Vec<usize> = (0..n).collect();
    for (place, antenna) in mapping {
        if place >= n {
            return Err(Error::Topology(vec![format!("map line for missing place {place}")]));
        }
        place_to_antenna[place] = antenna;
    }
    t.with_mapping(place_to_antenna)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::build_toroid;

    #[test]
    fn toroid_round_trips() {
        let t = build_toroid(4, 16).unwrap();
        let mut buf = Vec::new();
        write_topology(&mut buf, &t).unwrap();
        assert_eq!(read_topology(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn reports_bad_line() {
        let text = "places 2\nedge 0 x\n";
        assert!(matches!(
            read_topology(text.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn invalid_structure_surfaces_violations() {
        let text = "places 2\nedge 0 1\nnbhd 0 1 : 0 1\n";
        match read_topology(text.as_bytes()) {
            Err(Error::Topology(p)) => assert!(p[0].contains("(1, 0)")),
            other => panic!("unexpected {other:?}"),
        }
    }
}

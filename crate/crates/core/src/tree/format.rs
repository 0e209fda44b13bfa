//! Plain-text tree interchange format.
//!
//! ```text
//! tree d=4 root=0 horizon=2
//! 0 1
//! 1 2
//! alive 2
//! ```

use std::fmt::Write as _;

use super::window::RootedTreeWindow;
use crate::error::{Error, Result};

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Parse `key=value` tokens of a header line.
pub(crate) fn header_fields<'a>(
    line_no: usize,
    tokens: impl Iterator<Item = &'a str>,
    keys: &[&str],
) -> Result<Vec<u64>> {
    let mut values = vec![None; keys.len()];
    for tok in tokens {
        let (k, v) =
            tok.split_once('=').ok_or_else(|| parse_err(line_no, format!("expected key=value, got `{tok}`")))?;
        let slot =
            keys.iter().position(|&key| key == k).ok_or_else(|| parse_err(line_no, format!("unknown key `{k}`")))?;
        let parsed = v.parse().map_err(|_| parse_err(line_no, format!("`{v}` is not a nonnegative integer")))?;
        if values[slot].replace(parsed).is_some() {
            return Err(parse_err(line_no, format!("key `{k}` given twice")));
        }
    }
    keys.iter().zip(values).map(|(k, v)| v.ok_or_else(|| parse_err(line_no, format!("missing `{k}=`")))).collect()
}

pub fn parse_tree(text: &str) -> Result<RootedTreeWindow> {
    let mut lines =
        text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("tree") {
        return Err(parse_err(hline, "header must start with `tree`"));
    }
    let h = header_fields(hline, toks, &["d", "root", "horizon"])?;
    let mut edges = Vec::new();
    let mut alive = None;
    for (no, line) in lines {
        let mut toks = line.split_whitespace();
        let first = toks.next().unwrap_or_default();
        if first == "alive" {
            if alive.is_some() {
                return Err(parse_err(no, "second `alive` line"));
            }
            let ids = toks
                .map(|t| t.parse::<u64>().map_err(|_| parse_err(no, format!("bad vertex id `{t}`"))))
                .collect::<Result<Vec<_>>>()?;
            alive = Some(ids);
            continue;
        }
        let a: u64 = first.parse().map_err(|_| parse_err(no, format!("bad vertex id `{first}`")))?;
        let b: u64 = toks
            .next()
            .ok_or_else(|| parse_err(no, "edge needs two ids"))?
            .parse()
            .map_err(|_| parse_err(no, "bad vertex id"))?;
        if toks.next().is_some() {
            return Err(parse_err(no, "trailing tokens after edge"));
        }
        edges.push((a, b));
    }
    RootedTreeWindow::from_edges(h[0] as usize, h[1], h[2] as usize, &edges, &alive.unwrap_or_default())
}

pub fn write_tree(window: &RootedTreeWindow) -> String {
    let mut out = format!("tree d={} root={} horizon={}\n", window.d(), window.label(window.root()), window.horizon());
    for (p, c) in window.edges() {
        let _ = writeln!(out, "{} {}", window.label(p), window.label(c));
    }
    out.push_str("alive");
    for v in (0..window.len()).filter(|&v| window.is_alive(v)) {
        let _ = write!(out, " {}", window.label(v));
    }
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_writes_back() {
        let text = "tree d=4 root=5 horizon=2\n5 6\n6 7\n5 8\n8 9\nalive 7 9\n";
        let w = parse_tree(text).unwrap();
        assert_eq!(w.len(), 5);
        assert_eq!(w.alive_count(), 2);
        let again = parse_tree(&write_tree(&w)).unwrap();
        assert_eq!(again.len(), w.len());
        assert_eq!(write_tree(&again), write_tree(&w));
    }

    #[test]
    fn single_vertex_without_alive_line() {
        let w = parse_tree("tree d=3 root=0 horizon=0\n").unwrap();
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(parse_tree("").is_err());
        assert!(parse_tree("graph d=3 root=0 horizon=1\n").is_err());
        assert!(parse_tree("tree d=3 root=0\n").is_err());
        assert!(parse_tree("tree d=3 root=0 horizon=1\n0 1\n1 0\n").is_err());
        assert!(parse_tree("tree d=3 root=0 horizon=2\n0 1\n1 2\n2 0\n").is_err());
        assert!(parse_tree("tree d=3 root=0 horizon=1\n0 x\n").is_err());
        assert!(parse_tree("tree d=3 root=0 horizon=1\n0 1\nalive 1\nalive 1\n").is_err());
    }
}

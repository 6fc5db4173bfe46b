//! Plain-text graph format.
//!
//! ```text
//! p=4
//! # comment
//! 1 -> 2
//! 2 -- 3
//! ```

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graphs::{Cpdag, Dag, Pdag};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_node(s: &str, line: usize) -> Result<usize> {
    s.parse::<usize>()
        .map_err(|_| parse_err(line, format!("invalid node label '{s}'")))
}

impl FromStr for Pdag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut p: Option<usize> = None;
        let mut directed = Vec::new();
        let mut undirected = Vec::new();
        for (k, raw) in s.lines().enumerate() {
            let line_no = k + 1;
            let content = raw.split('#').next().unwrap_or("");
            let compact: String = content.chars().filter(|c| !c.is_whitespace()).collect();
            if compact.is_empty() {
                continue;
            }
            if p.is_none() {
                let rest = compact
                    .strip_prefix("p=")
                    .ok_or_else(|| parse_err(line_no, "expected header 'p=<int>'"))?;
                let value = parse_node(rest, line_no)?;
                if value == 0 {
                    return Err(parse_err(line_no, "p must be positive"));
                }
                p = Some(value);
                continue;
            }
            if let Some((a, b)) = compact.split_once("->") {
                directed.push((parse_node(a, line_no)?, parse_node(b, line_no)?));
            } else if let Some((a, b)) = compact.split_once("--") {
                undirected.push((parse_node(a, line_no)?, parse_node(b, line_no)?));
            } else {
                return Err(parse_err(line_no, format!("unrecognised edge '{}'", raw.trim())));
            }
        }
        let p = p.ok_or_else(|| parse_err(0, "missing header 'p=<int>'"))?;
        Pdag::from_edges(p, &directed, &undirected)
    }
}

impl FromStr for Cpdag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Cpdag::try_from_pdag(s.parse()?)
    }
}

impl FromStr for Dag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Dag::try_from_pdag(s.parse()?)
    }
}

impl fmt::Display for Pdag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "p={}", self.node_count())?;
        for (i, j) in self.directed_edges() {
            writeln!(f, "{i} -> {j}")?;
        }
        for (i, j) in self.undirected_edges() {
            writeln!(f, "{i} -- {j}")?;
        }
        Ok(())
    }
}

impl fmt::Display for Cpdag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.as_pdag().fmt(f)
    }
}

impl fmt::Display for Dag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.as_pdag().fmt(f)
    }
}

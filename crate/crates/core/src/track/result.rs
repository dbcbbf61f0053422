//! Tracking output and its text format.

use std::fmt::Write as _;
use std::path::Path;

use super::{Method, Status, TrackConfig};
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::keyvalue::KeyValues;

/// Per-frame, per-cell estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackResult {
    pub method: Method,
    pub config: TrackConfig,
    pub root: Option<usize>,
    /// `estimates[t][k]`, physical coordinates.
    pub estimates: Vec<Vec<Point>>,
    pub status: Vec<Vec<Status>>,
}

impl TrackResult {
    pub fn new(method: Method, config: TrackConfig, root: Option<usize>, first: Vec<Point>) -> Self {
        let k = first.len();
        TrackResult {
            method,
            config,
            root,
            estimates: vec![first],
            status: vec![vec![Status::Tracked; k]],
        }
    }

    pub fn push_frame(&mut self, frame: Vec<(Point, Status)>) {
        let (e, s) = frame.into_iter().unzip();
        self.estimates.push(e);
        self.status.push(s);
    }

    pub fn frames(&self) -> usize {
        self.estimates.len()
    }

    pub fn cells(&self) -> usize {
        self.estimates.first().map_or(0, Vec::len)
    }

    /// Header lines `# method = ..`, `# root = ..`, `# config key = value`,
    /// then one `t k x y z status` line per frame and cell.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# method = {}", self.method).unwrap();
        if let Some(r) = self.root {
            writeln!(s, "# root = {r}").unwrap();
        }
        for (k, v) in self.config.to_key_values() {
            writeln!(s, "# config {k} = {v}").unwrap();
        }
        for (t, (est, st)) in self.estimates.iter().zip(&self.status).enumerate() {
            for (k, (p, status)) in est.iter().zip(st).enumerate() {
                writeln!(s, "{t} {k} {} {} {} {}", p.x, p.y, p.z, status.as_str()).unwrap();
            }
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn parse(source: &str, text: &str) -> Result<Self> {
        let mut method = Method::Spf;
        let mut root = None;
        let mut config_lines = String::new();
        let mut estimates: Vec<Vec<Point>> = Vec::new();
        let mut status: Vec<Vec<Status>> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let bad = |m: String| Error::parse(source, i + 1, m);
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(h) = line.strip_prefix('#') {
                let h = h.trim();
                if let Some(c) = h.strip_prefix("config ") {
                    config_lines.push_str(c);
                    config_lines.push('\n');
                } else if let Some(m) = h.strip_prefix("method = ") {
                    method = m.parse()?;
                } else if let Some(r) = h.strip_prefix("root = ") {
                    root = Some(r.parse().map_err(|_| bad("bad root".into()))?);
                }
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 6 {
                return Err(bad("expected `t k x y z status`".into()));
            }
            let t: usize = f[0].parse().map_err(|_| bad("bad frame".into()))?;
            let k: usize = f[1].parse().map_err(|_| bad("bad cell".into()))?;
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number {s:?}")));
            let p = Point::new(num(f[2])?, num(f[3])?, num(f[4])?);
            let st: Status = f[5].parse().map_err(bad)?;
            if t == estimates.len() && k == 0 {
                estimates.push(Vec::new());
                status.push(Vec::new());
            }
            if t + 1 != estimates.len() || k != estimates[t].len() {
                return Err(bad(format!("rows must be ordered by t then k; unexpected ({t}, {k})")));
            }
            estimates[t].push(p);
            status[t].push(st);
        }
        if let Some(first) = estimates.first() {
            if estimates.iter().any(|e| e.len() != first.len()) {
                return Err(Error::parse(source, 0, "frames have differing cell counts"));
            }
        }
        let config = TrackConfig::from_key_values(KeyValues::parse(source, &config_lines)?)?;
        Ok(TrackResult {
            method,
            config,
            root,
            estimates,
            status,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&path.display().to_string(), &text)
    }
}

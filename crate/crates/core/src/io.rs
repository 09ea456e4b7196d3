//! Columnar text tables and the `FMF1` binary snapshot format.
//!
//! Tables are UTF-8, comma separated, with `# key: value` metadata lines
//! before a header row of column names. Numbers use the shortest
//! representation that reads back to the same `f64`.
//!
//! A snapshot is the magic `FMF1`, then `dim: u32`, `n: u64`, then
//! positions, velocities and weights as little-endian `f64` arrays.

use std::io::{BufRead, Read, Write};

use crate::dynamics::TrajectoryRecord;
use crate::ensemble::AgentEnsemble;
use crate::error::{shape, Error, Result};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"FMF1";

fn io_err(e: std::io::Error) -> Error {
    Error::Shape(format!("i/o: {e}"))
}

/// Named `f64` columns of equal length plus metadata.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn meta(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.meta.push((key.into(), value.to_string()));
        self
    }

    pub fn column(mut self, name: impl Into<String>, values: Vec<f64>) -> Self {
        self.names.push(name.into());
        self.columns.push(values);
        self
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.columns[i].as_slice())
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn validate(&self) -> Result<()> {
        if self.names.len() != self.columns.len() {
            return Err(shape("one name per column"));
        }
        let n = self.rows();
        if self.columns.iter().any(|c| c.len() != n) {
            return Err(shape("columns differ in length"));
        }
        if self.names.iter().any(|s| s.is_empty() || s.contains([',', '\n'])) {
            return Err(shape("column names must be nonempty and free of commas and newlines"));
        }
        if self.meta.iter().any(|(k, v)| k.contains([':', '\n']) || v.contains('\n')) {
            return Err(shape("metadata keys must not contain ':' and entries must be single-line"));
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        self.validate()?;
        let mut s = String::new();
        for (k, v) in &self.meta {
            s.push_str(&format!("# {k}: {v}\n"));
        }
        s.push_str(&self.names.join(","));
        s.push('\n');
        for r in 0..self.rows() {
            for (c, col) in self.columns.iter().enumerate() {
                if c > 0 {
                    s.push(',');
                }
                s.push_str(&format!("{:?}", col[r]));
            }
            s.push('\n');
        }
        w.write_all(s.as_bytes()).map_err(io_err)
    }

    pub fn render(&self) -> Result<String> {
        let mut v = Vec::new();
        self.write_to(&mut v)?;
        Ok(String::from_utf8(v).expect("tables are UTF-8"))
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Table> {
        let mut t = Table::new();
        let mut header = false;
        for (ln, line) in r.lines().enumerate() {
            let line = line.map_err(io_err)?;
            if let Some(m) = line.strip_prefix('#') {
                if header {
                    return Err(shape(format!("line {}: metadata after the header row", ln + 1)));
                }
                let (k, v) = m.split_once(':').ok_or_else(|| shape(format!("line {}: metadata needs `key: value`", ln + 1)))?;
                t.meta.push((k.trim().to_string(), v.trim().to_string()));
            } else if !header {
                t.names = line.split(',').map(str::to_string).collect();
                t.columns = vec![Vec::new(); t.names.len()];
                header = true;
            } else if !line.is_empty() {
                let cells: Vec<&str> = line.split(',').collect();
                if cells.len() != t.names.len() {
                    return Err(shape(format!("line {}: {} cells, expected {}", ln + 1, cells.len(), t.names.len())));
                }
                for (c, cell) in cells.iter().enumerate() {
                    let x = cell.parse::<f64>().map_err(|_| shape(format!("line {}: bad number `{cell}`", ln + 1)))?;
                    t.columns[c].push(x);
                }
            }
        }
        if !header {
            return Err(shape("table has no header row"));
        }
        Ok(t)
    }
}

/// `t, D, V` per sample, plus flattened `x*_*`/`v*_*` state columns when
/// snapshots are stored and `with_state` is set.
pub fn trajectory_table(rec: &TrajectoryRecord, with_state: bool) -> Table {
    let mut t = Table::new()
        .meta("p", rec.params.p)
        .meta("alpha", rec.params.alpha())
        .meta("d", rec.params.d)
        .column("t", rec.times.clone())
        .column("D", rec.spatial())
        .column("V", rec.velocity());
    if let (true, Some(s)) = (with_state, rec.snapshots.as_ref()) {
        let (n, d) = (s[0].n(), s[0].dim);
        for i in 0..n {
            for k in 0..d {
                t = t.column(format!("x{i}_{k}"), s.iter().map(|e| e.positions[i * d + k]).collect());
            }
        }
        for i in 0..n {
            for k in 0..d {
                t = t.column(format!("v{i}_{k}"), s.iter().map(|e| e.velocities[i * d + k]).collect());
            }
        }
    }
    t
}

pub fn write_snapshot<W: Write>(mut w: W, ens: &AgentEnsemble) -> Result<()> {
    ens.validate()?;
    let mut buf = Vec::with_capacity(16 + 8 * (ens.positions.len() * 2 + ens.n()));
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    buf.extend_from_slice(&(ens.dim as u32).to_le_bytes());
    buf.extend_from_slice(&(ens.n() as u64).to_le_bytes());
    for x in ens.positions.iter().chain(&ens.velocities).chain(&ens.weights) {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf).map_err(io_err)
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<AgentEnsemble> {
    let mut head = [0u8; 16];
    r.read_exact(&mut head).map_err(io_err)?;
    if &head[..4] != SNAPSHOT_MAGIC {
        return Err(shape("not an FMF1 snapshot"));
    }
    let dim = u32::from_le_bytes(head[4..8].try_into().unwrap()) as usize;
    let n = u64::from_le_bytes(head[8..16].try_into().unwrap()) as usize;
    let len = n.checked_mul(dim).and_then(|nd| nd.checked_mul(2)).and_then(|x| x.checked_add(n)).ok_or_else(|| shape("snapshot size overflows"))?;
    let mut raw = Vec::new();
    r.read_to_end(&mut raw).map_err(io_err)?;
    if raw.len() != 8 * len {
        return Err(shape(format!("snapshot body holds {} bytes, expected {}", raw.len(), 8 * len)));
    }
    let vals: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let nd = n * dim;
    AgentEnsemble::new(dim, vals[..nd].to_vec(), vals[nd..2 * nd].to_vec(), vals[2 * nd..].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_roundtrip() {
        let t = Table::new()
            .meta("config_hash", "abc")
            .column("t", vec![0.0, 0.1, 1e-300])
            .column("V", vec![1.0 / 3.0, f64::MAX, -0.0]);
        let s = t.render().unwrap();
        assert!(s.starts_with("# config_hash: abc\nt,V\n"));
        let back = Table::read_from(s.as_bytes()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn snapshot_roundtrip() {
        let e = AgentEnsemble::new(2, vec![0.1, 0.2, 0.3, 0.4], vec![1.0, -1.0, 0.5, 0.25], vec![0.25, 0.75]).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &e).unwrap();
        assert_eq!(&buf[..4], b"FMF1");
        assert_eq!(buf.len(), 16 + 8 * 10);
        assert_eq!(read_snapshot(buf.as_slice()).unwrap(), e);
        buf[0] = b'X';
        assert!(read_snapshot(buf.as_slice()).is_err());
    }
}

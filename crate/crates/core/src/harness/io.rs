//! Flat-file output: CSV with a header row, LF line endings and 17
//! significant digits, so every `f64` round-trips exactly.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::blayer::BoundaryLayerSolution;
use crate::energetics::StressVector;
use crate::equilibrium::{discrete_density, strain, Configuration, StrainField};
use crate::error::{Error, Result};

/// `{:.16e}`: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// A table whose cells are already formatted.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_to(&self, w: impl Write) -> Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        out.write_record(&self.header)?;
        for r in &self.rows {
            out.write_record(r)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        self.write_to(BufWriter::new(File::create(path)?))
    }
}

/// `i,x,eps,rho` for `i = 0..=n`; undefined cells are left empty.
pub fn configuration_table(c: &Configuration) -> Table {
    let n = c.n();
    let eps = strain(c);
    let rho = discrete_density(c).unwrap_or_default();
    let mut t = Table::new(&["i", "x", "eps", "rho"]);
    for i in 0..=n {
        t.push(vec![
            i.to_string(),
            fmt_f64(c.position(i)),
            if i >= 1 { fmt_f64(eps.get(i)) } else { String::new() },
            if i >= 1 && i < n { fmt_f64(rho[i - 1]) } else { String::new() },
        ]);
    }
    t
}

/// `i,y,eps_l` for `i = 0..=J`; `eps_l` is empty at 0 and zero past `I`.
pub fn boundary_layer_table(sol: &BoundaryLayerSolution) -> Table {
    let eps = sol.strains();
    let mut t = Table::new(&["i", "y", "eps_l"]);
    for i in 0..=sol.trunc_len() {
        let e = match i {
            0 => String::new(),
            i if i <= sol.free_len() => fmt_f64(eps[i - 1]),
            _ => fmt_f64(0.0),
        };
        t.push(vec![i.to_string(), fmt_f64(sol.y(i)), e]);
    }
    t
}

/// `i,sigma`, at most `imax` rows.
pub fn stress_table(s: &StressVector, imax: usize) -> Table {
    let mut t = Table::new(&["i", "sigma"]);
    for i in 1..=imax {
        t.push(vec![i.to_string(), fmt_f64(s.get(i))]);
    }
    t
}

/// Reads a strain field from CSV: the `eps` column if there is one,
/// otherwise the last column.
pub fn read_strain(r: impl Read) -> Result<StrainField> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header = rdr.headers()?.clone();
    let col = header.iter().position(|h| h == "eps").unwrap_or(header.len().saturating_sub(1));
    let mut eps = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let cell = rec.get(col).unwrap_or("");
        if cell.is_empty() {
            continue;
        }
        let v: f64 = cell.parse().map_err(|_| Error::Parse(format!("row {}: `{cell}` is not a number", line + 2)))?;
        eps.push(v);
    }
    if eps.is_empty() {
        return Err(Error::Parse("no strain values found".into()));
    }
    StrainField::new(eps)
}

pub fn read_strain_path(path: impl AsRef<Path>) -> Result<StrainField> {
    read_strain(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn configuration_csv_layout() {
        let c = Configuration::equispaced(2).unwrap();
        let mut buf = Vec::new();
        configuration_table(&c).write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.split('\n').collect();
        assert_eq!(lines[0], "i,x,eps,rho");
        assert_eq!(lines[1], "0,0.0000000000000000e0,,");
        assert!(lines[2].starts_with("1,5.0000000000000000e-1,0.0000000000000000e0,1.0000000000000000e0"));
        assert_eq!(lines[3], "2,1.0000000000000000e0,0.0000000000000000e0,");
        assert!(!text.contains('\r'));
    }

    #[test]
    fn strain_round_trip() {
        let c = Configuration::from_positions(&[0.0, 0.3, 0.7, 1.0]).unwrap();
        let mut buf = Vec::new();
        configuration_table(&c).write_to(&mut buf).unwrap();
        let e = read_strain(buf.as_slice()).unwrap();
        assert_eq!(e, strain(&c));
        assert!(read_strain("i,eps\n1,abc\n".as_bytes()).is_err());
        assert!(read_strain("i,eps\n".as_bytes()).is_err());
    }
}

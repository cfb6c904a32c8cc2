//! Dataset CSV files with header `x1,...,xd,z1,...,zp`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::copula::Dataset;
use crate::error::{Error, Result};

fn column_index(name: &str) -> Option<(char, usize)> {
    let (kind, rest) = name.split_at(1.min(name.len()));
    let kind = kind.chars().next()?;
    if kind != 'x' && kind != 'z' {
        return None;
    }
    match rest.parse::<usize>() {
        Ok(i) if i >= 1 && !rest.starts_with('0') => Some((kind, i)),
        _ => None,
    }
}

/// Reads a dataset; columns may appear in any order but `x` and `z` indices must be contiguous from 1.
pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Data(format!("cannot read header: {e}")))?
        .clone();
    let mut slots = Vec::with_capacity(header.len());
    let (mut d, mut p) = (0, 0);
    for (pos, name) in header.iter().enumerate() {
        let Some((kind, i)) = column_index(name) else {
            return Err(Error::Data(format!(
                "unexpected column '{name}' at position {} (expected x1..xd and z1..zp)",
                pos + 1
            )));
        };
        if slots.contains(&(kind, i)) {
            return Err(Error::Data(format!("duplicate column {name}")));
        }
        if kind == 'x' {
            d = d.max(i);
        } else {
            p = p.max(i);
        }
        slots.push((kind, i));
    }
    for (kind, count) in [('x', d), ('z', p)] {
        if let Some(missing) = (1..=count).find(|i| !slots.contains(&(kind, *i))) {
            return Err(Error::Data(format!("missing column {kind}{missing}")));
        }
    }
    let mut x = vec![Vec::new(); d];
    let mut z = vec![Vec::new(); p];
    for (r, record) in rdr.records().enumerate() {
        let row = r + 2;
        let record = record.map_err(|e| Error::Data(format!("row {row}: {e}")))?;
        if record.len() != slots.len() {
            return Err(Error::Data(format!(
                "row {row}: expected {} fields, found {}",
                slots.len(),
                record.len()
            )));
        }
        for (field, &(kind, i)) in record.iter().zip(&slots) {
            let v: f64 =
                field.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                    Error::Data(format!("row {row}, column {kind}{i}: '{field}' is not a finite number"))
                })?;
            if kind == 'x' {
                x[i - 1].push(v);
            } else {
                z[i - 1].push(v);
            }
        }
    }
    Dataset::from_columns(x, z)
}

pub fn read_dataset_file(path: &Path) -> Result<Dataset> {
    let f = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_dataset(f)
}

/// Errors naming the first absent column when fewer than `d` or `p` columns are present.
pub fn require_columns(data: &Dataset, d: usize, p: usize) -> Result<()> {
    if data.d() < d {
        return Err(Error::Data(format!("missing column x{}", data.d() + 1)));
    }
    if data.p() < p {
        return Err(Error::Data(format!("missing column z{}", data.p() + 1)));
    }
    Ok(())
}

pub fn write_dataset<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<String> = (1..=data.d())
        .map(|j| format!("x{j}"))
        .chain((1..=data.p()).map(|k| format!("z{k}")))
        .collect();
    w.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
    for i in 0..data.n() {
        let row: Vec<String> = data
            .x_columns()
            .iter()
            .chain(data.z_columns())
            .map(|c| c[i].to_string())
            .collect();
        w.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::{sample, BuiltinModel};

    #[test]
    fn roundtrip_is_exact() {
        let d = sample(&BuiltinModel::Gauss08z.model(), 50, 1).unwrap();
        let mut buf = Vec::new();
        write_dataset(&d, &mut buf).unwrap();
        let back = read_dataset(buf.as_slice()).unwrap();
        assert_eq!(back.x_columns(), d.x_columns());
        assert_eq!(back.z_columns(), d.z_columns());
    }

    #[test]
    fn columns_in_any_order() {
        let d = read_dataset("z1,x2,x1\n0.5,2,1\n0.6,4,3\n".as_bytes()).unwrap();
        assert_eq!(d.x(0), &[1.0, 3.0]);
        assert_eq!(d.x(1), &[2.0, 4.0]);
        assert_eq!(d.z(0), &[0.5, 0.6]);
    }

    #[test]
    fn diagnostics_name_rows_and_columns() {
        let e = read_dataset("x1,x2,z2\n1,2,3\n".as_bytes()).unwrap_err();
        assert!(e.to_string().contains("missing column z1"), "{e}");
        let e = read_dataset("x1,x2,z1\n1,2,3\n1,abc,3\n".as_bytes()).unwrap_err();
        assert!(e.to_string().contains("row 3, column x2"), "{e}");
        let e = read_dataset("x1,y\n1,2\n".as_bytes()).unwrap_err();
        assert!(e.to_string().contains("'y'"), "{e}");
        let e = read_dataset("x1,x2\n1,2\n3\n".as_bytes()).unwrap_err();
        assert!(e.to_string().contains("row 3"), "{e}");
        let d = read_dataset("x1,x2\n1,2\n".as_bytes()).unwrap();
        assert!(require_columns(&d, 2, 1)
            .unwrap_err()
            .to_string()
            .contains("missing column z1"));
    }
}

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectra::WavelengthGrid;

pub(crate) const WAVELENGTH_HEADER: &str = "wavelength_nm";
pub(crate) const ID_HEADER: &str = "spectrum_id";

pub(crate) struct WavelengthTable {
    pub grid: WavelengthGrid,
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

fn parse_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

fn open_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => parse_err(path, format!("{other:?}")),
    }
}

fn parse_value(path: &Path, row: usize, field: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| parse_err(path, format!("line {row}: '{field}' is not a number")))?;
    if v.is_nan() {
        return Err(Error::Data(format!(
            "{}: NaN at line {row}",
            path.display()
        )));
    }
    if !v.is_finite() {
        return Err(Error::Data(format!(
            "{}: infinite value at line {row}",
            path.display()
        )));
    }
    Ok(v)
}

/// Reads the `wavelength_nm,<col1>,...` layout shared by libraries and
/// spectra batches.
pub(crate) fn read_wavelength_table(path: &Path) -> Result<WavelengthTable> {
    let mut rdr = open_reader(path)?;
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| csv_err(path, e))?,
        None => return Err(parse_err(path, "file is empty")),
    };
    let first = header.get(0).unwrap_or("").trim_start_matches('\u{feff}');
    if first != WAVELENGTH_HEADER {
        return Err(parse_err(
            path,
            format!("missing header: first column must be '{WAVELENGTH_HEADER}', found '{first}'"),
        ));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    if names.is_empty() {
        return Err(parse_err(path, "no data columns after wavelength_nm"));
    }
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(parse_err(path, format!("duplicate column name '{n}'")));
        }
    }
    let mut wavelengths = Vec::new();
    let mut columns = vec![Vec::new(); names.len()];
    for (r, rec) in records.enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = r + 2;
        if rec.len() != names.len() + 1 {
            return Err(parse_err(
                path,
                format!(
                    "line {line}: expected {} fields, found {}",
                    names.len() + 1,
                    rec.len()
                ),
            ));
        }
        wavelengths.push(parse_value(path, line, &rec[0])?);
        for (col, field) in columns.iter_mut().zip(rec.iter().skip(1)) {
            col.push(parse_value(path, line, field)?);
        }
    }
    let grid = WavelengthGrid::new(wavelengths)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    Ok(WavelengthTable {
        grid,
        names,
        columns,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes values with Rust's shortest round-trip float formatting.
pub(crate) fn write_wavelength_table(
    path: &Path,
    grid: &WavelengthGrid,
    names: &[String],
    columns: &[&[f64]],
) -> Result<()> {
    check_table(grid, columns)?;
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    write_table_to(&mut out, grid, names, columns).map_err(io)?;
    out.flush().map_err(io)
}

/// The bytes [`write_wavelength_table`] would write.
pub(crate) fn wavelength_table_bytes(
    grid: &WavelengthGrid,
    names: &[String],
    columns: &[&[f64]],
) -> Result<Vec<u8>> {
    check_table(grid, columns)?;
    let mut out = Vec::new();
    write_table_to(&mut out, grid, names, columns).expect("writing to memory");
    Ok(out)
}

fn check_table(grid: &WavelengthGrid, columns: &[&[f64]]) -> Result<()> {
    if columns.is_empty() {
        return Err(Error::invalid("nothing to write: no columns"));
    }
    if columns.iter().any(|c| c.len() != grid.len()) {
        return Err(Error::dim("column length differs from grid length"));
    }
    Ok(())
}

fn write_table_to<W: Write>(
    out: &mut W,
    grid: &WavelengthGrid,
    names: &[String],
    columns: &[&[f64]],
) -> std::io::Result<()> {
    write!(out, "{WAVELENGTH_HEADER}")?;
    for n in names {
        write!(out, ",{n}")?;
    }
    writeln!(out)?;
    for (i, w) in grid.wavelengths().iter().enumerate() {
        write!(out, "{w}")?;
        for c in columns {
            write!(out, ",{}", c[i])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Abundance rows keyed by spectrum id: `spectrum_id,<endmember names...>`.
#[derive(Debug, Clone, PartialEq)]
pub struct AbundanceTable {
    pub names: Vec<String>,
    pub ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn write_abundances(path: impl AsRef<Path>, table: &AbundanceTable) -> Result<()> {
    let path = path.as_ref();
    if table.ids.len() != table.rows.len() {
        return Err(Error::dim("one id per abundance row required"));
    }
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    write!(out, "{ID_HEADER}").map_err(io)?;
    for n in &table.names {
        write!(out, ",{n}").map_err(io)?;
    }
    writeln!(out).map_err(io)?;
    for (id, row) in table.ids.iter().zip(&table.rows) {
        if row.len() != table.names.len() {
            return Err(Error::dim(format!("row '{id}' has {} values", row.len())));
        }
        write!(out, "{id}").map_err(io)?;
        for v in row {
            write!(out, ",{v}").map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_abundances(path: impl AsRef<Path>) -> Result<AbundanceTable> {
    let path = path.as_ref();
    let mut rdr = open_reader(path)?;
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| csv_err(path, e))?,
        None => return Err(parse_err(path, "file is empty")),
    };
    if header.get(0) != Some(ID_HEADER) {
        return Err(parse_err(
            path,
            format!("missing header: first column must be '{ID_HEADER}'"),
        ));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (r, rec) in records.enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = r + 2;
        if rec.len() != names.len() + 1 {
            return Err(parse_err(path, format!("line {line}: wrong field count")));
        }
        ids.push(rec[0].to_owned());
        rows.push(
            rec.iter()
                .skip(1)
                .map(|f| parse_value(path, line, f))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(AbundanceTable { names, ids, rows })
}

//! MPS export and re-import, plus `name,value` solution files.
//!
//! Sections follow the fixed-format layout; fields are whitespace separated
//! so names longer than eight characters survive.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::model::{LinearProgram, MixedIntegerProgram, Sense};
use crate::error::{Error, Result};

/// Any model that can be written as MPS.
pub trait MpsModel {
    fn linear(&self) -> &LinearProgram;
    fn is_binary(&self, _var: usize) -> bool {
        false
    }
}

impl MpsModel for LinearProgram {
    fn linear(&self) -> &LinearProgram {
        self
    }
}

impl MpsModel for MixedIntegerProgram {
    fn linear(&self) -> &LinearProgram {
        &self.lp
    }
    fn is_binary(&self, var: usize) -> bool {
        MixedIntegerProgram::is_binary(self, var)
    }
}

fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        "0".to_string()
    } else if (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn objective_row_name(lp: &LinearProgram) -> String {
    let mut name = "COST".to_string();
    let mut k = 0;
    while lp.constraints.iter().any(|c| c.name == name) {
        k += 1;
        name = format!("COST_{k}");
    }
    name
}

pub fn write_mps(model: &dyn MpsModel) -> String {
    let lp = model.linear();
    let obj = objective_row_name(lp);
    let mut out = String::new();
    let name = if lp.name.is_empty() { "MODEL" } else { lp.name.as_str() };
    let _ = writeln!(out, "NAME          {name}");
    out.push_str("ROWS\n");
    let _ = writeln!(out, " N  {obj}");
    for c in &lp.constraints {
        let tag = match c.sense {
            Sense::Le => 'L',
            Sense::Ge => 'G',
            Sense::Eq => 'E',
        };
        let _ = writeln!(out, " {tag}  {}", c.name);
    }

    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lp.num_variables()];
    for (i, c) in lp.constraints.iter().enumerate() {
        for &(j, a) in &c.coeffs {
            by_col[j].push((i, a));
        }
    }
    out.push_str("COLUMNS\n");
    let mut in_int = false;
    let mut marker = 0;
    for (j, v) in lp.variables.iter().enumerate() {
        let int = model.is_binary(j);
        if int != in_int {
            let kind = if int { "INTORG" } else { "INTEND" };
            let _ = writeln!(out, "    MARKER{marker:<4}  'MARKER'                 '{kind}'");
            marker += 1;
            in_int = int;
        }
        let mut wrote = false;
        if v.cost != 0.0 {
            let _ = writeln!(out, "    {:<8}  {:<8}  {:>12}", v.name, obj, num(v.cost));
            wrote = true;
        }
        for &(i, a) in &by_col[j] {
            let _ = writeln!(out, "    {:<8}  {:<8}  {:>12}", v.name, lp.constraints[i].name, num(a));
            wrote = true;
        }
        if !wrote {
            let _ = writeln!(out, "    {:<8}  {:<8}  {:>12}", v.name, obj, "0");
        }
    }
    if in_int {
        let _ = writeln!(out, "    MARKER{marker:<4}  'MARKER'                 'INTEND'");
    }

    out.push_str("RHS\n");
    for c in &lp.constraints {
        if c.rhs != 0.0 {
            let _ = writeln!(out, "    RHS       {:<8}  {:>12}", c.name, num(c.rhs));
        }
    }

    out.push_str("BOUNDS\n");
    for (j, v) in lp.variables.iter().enumerate() {
        let n = &v.name;
        let (lo, hi) = (v.lower, v.upper);
        if model.is_binary(j) && lo == 0.0 && hi == 1.0 {
            let _ = writeln!(out, " BV BND       {n}");
        } else if lo == hi {
            let _ = writeln!(out, " FX BND       {n:<8}  {:>12}", num(lo));
        } else if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            let _ = writeln!(out, " FR BND       {n}");
        } else {
            if lo == f64::NEG_INFINITY {
                let _ = writeln!(out, " MI BND       {n}");
            } else if lo != 0.0 || model.is_binary(j) {
                let _ = writeln!(out, " LO BND       {n:<8}  {:>12}", num(lo));
            }
            if hi.is_finite() {
                let _ = writeln!(out, " UP BND       {n:<8}  {:>12}", num(hi));
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}

pub fn export_mps(model: &dyn MpsModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_mps(model)).map_err(|e| Error::io(path, e))
}

/// Parses MPS text produced by [`write_mps`] (or any free-field MPS without
/// RANGES). Integer-marked columns come back as binaries.
pub fn parse_mps(text: &str, origin: &Path) -> Result<MixedIntegerProgram> {
    let err = |line: usize, msg: &str| Error::parse(origin, format!("line {}: {msg}", line + 1));
    let parse_num = |line: usize, s: &str| s.parse::<f64>().map_err(|_| err(line, &format!("bad number {s:?}")));

    let mut lp = LinearProgram::new("");
    let mut objective: Option<String> = None;
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut integer = Vec::new();
    let mut section = "";
    let mut in_int = false;
    let mut ended = false;

    for (ln, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(' ') {
            section = fields[0];
            match section {
                "NAME" => lp.name = fields.get(1).copied().unwrap_or("").to_string(),
                "ROWS" | "COLUMNS" | "RHS" | "RANGES" | "BOUNDS" => {}
                "ENDATA" => {
                    ended = true;
                    break;
                }
                other => return Err(err(ln, &format!("unknown section {other}"))),
            }
            continue;
        }
        match section {
            "ROWS" => {
                let [tag, name] = fields[..] else {
                    return Err(err(ln, "expected `<type> <name>`"));
                };
                let sense = match tag {
                    "N" => {
                        if objective.is_none() {
                            objective = Some(name.to_string());
                        }
                        continue;
                    }
                    "L" => Sense::Le,
                    "G" => Sense::Ge,
                    "E" => Sense::Eq,
                    _ => return Err(err(ln, &format!("unknown row type {tag}"))),
                };
                row_index.insert(name.to_string(), lp.constraints.len());
                lp.add_constraint(name, Vec::new(), sense, 0.0);
            }
            "COLUMNS" => {
                if fields.len() >= 3 && fields[1] == "'MARKER'" {
                    in_int = match fields[2] {
                        "'INTORG'" => true,
                        "'INTEND'" => false,
                        m => return Err(err(ln, &format!("unknown marker {m}"))),
                    };
                    continue;
                }
                if fields.len() != 3 && fields.len() != 5 {
                    return Err(err(ln, "expected `<col> <row> <value> [<row> <value>]`"));
                }
                let col = fields[0];
                let j = match col_index.get(col) {
                    Some(&j) => j,
                    None => {
                        let j = lp.add_variable(col, 0.0, f64::INFINITY, 0.0);
                        col_index.insert(col.to_string(), j);
                        if in_int {
                            integer.push(j);
                        }
                        j
                    }
                };
                for pair in fields[1..].chunks(2) {
                    let value = parse_num(ln, pair[1])?;
                    if Some(pair[0]) == objective.as_deref() {
                        lp.variables[j].cost = value;
                    } else {
                        let &i = row_index.get(pair[0]).ok_or_else(|| err(ln, &format!("unknown row {}", pair[0])))?;
                        lp.constraints[i].coeffs.push((j, value));
                    }
                }
            }
            "RHS" => {
                if fields.len() != 3 && fields.len() != 5 {
                    return Err(err(ln, "expected `<set> <row> <value> [<row> <value>]`"));
                }
                for pair in fields[1..].chunks(2) {
                    let value = parse_num(ln, pair[1])?;
                    if Some(pair[0]) == objective.as_deref() {
                        continue;
                    }
                    let &i = row_index.get(pair[0]).ok_or_else(|| err(ln, &format!("unknown row {}", pair[0])))?;
                    lp.constraints[i].rhs = value;
                }
            }
            "RANGES" => return Err(err(ln, "RANGES entries are not supported")),
            "BOUNDS" => {
                if fields.len() < 3 {
                    return Err(err(ln, "expected `<type> <set> <col> [<value>]`"));
                }
                let &j = col_index
                    .get(fields[2])
                    .ok_or_else(|| err(ln, &format!("unknown column {}", fields[2])))?;
                let value = || -> Result<f64> {
                    let s = fields.get(3).ok_or_else(|| err(ln, "missing bound value"))?;
                    parse_num(ln, s)
                };
                let v = &mut lp.variables[j];
                match fields[0] {
                    "LO" => v.lower = value()?,
                    "UP" => v.upper = value()?,
                    "FX" => {
                        let x = value()?;
                        v.lower = x;
                        v.upper = x;
                    }
                    "FR" => {
                        v.lower = f64::NEG_INFINITY;
                        v.upper = f64::INFINITY;
                    }
                    "MI" => v.lower = f64::NEG_INFINITY,
                    "PL" => v.upper = f64::INFINITY,
                    "BV" => {
                        v.lower = 0.0;
                        v.upper = 1.0;
                    }
                    t => return Err(err(ln, &format!("unsupported bound type {t}"))),
                }
            }
            _ => return Err(err(ln, "data line outside a section")),
        }
    }
    if !ended {
        return Err(Error::parse(origin, "missing ENDATA"));
    }
    let mut mip = MixedIntegerProgram::new(lp);
    for j in integer {
        mip.mark_binary(j);
    }
    Ok(mip)
}

pub fn import_mps(path: impl AsRef<Path>) -> Result<MixedIntegerProgram> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mps(&text, path)
}

/// Reads an external solver's `name,value` CSV and orders it like `lp`.
pub fn read_solution_csv(lp: &LinearProgram, path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::parse(path, e))?;
    let headers = reader.headers().map_err(|e| Error::parse(path, e))?.clone();
    if headers.len() != 2 || &headers[0] != "name" || &headers[1] != "value" {
        return Err(Error::parse(path, "expected header `name,value`"));
    }
    let index: HashMap<&str, usize> = lp.variables.iter().enumerate().map(|(j, v)| (v.name.as_str(), j)).collect();
    let mut values = vec![f64::NAN; lp.num_variables()];
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::parse(path, e))?;
        let &j = index
            .get(&rec[0])
            .ok_or_else(|| Error::parse(path, format!("unknown variable {:?}", &rec[0])))?;
        values[j] = rec[1]
            .parse()
            .map_err(|_| Error::parse(path, format!("bad value {:?} for {}", &rec[1], &rec[0])))?;
    }
    if let Some(j) = values.iter().position(|v| v.is_nan()) {
        return Err(Error::parse(path, format!("no value for variable {}", lp.variables[j].name)));
    }
    Ok(values)
}

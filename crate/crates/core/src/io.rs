//! Delimited-text readers and writers.
//!
//! Database, profile and mixture files share one layout: a header row of locus names (any
//! order), then one row per individual. Tab or comma delimiters are detected from the header.
//! Empty cells and `NA` are unobserved loci. Mixture cells may list several alleles joined by
//! `/`, e.g. `12/14`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimators::GDistribution;
use crate::mixture::MixtureProfile;
use crate::model::{Haplotype, HaplotypeDatabase, Panel};

fn detect_delimiter(text: &str) -> u8 {
    let header = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if header.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

struct Table {
    /// Panel locus index for each column.
    columns: Vec<usize>,
    names: Vec<String>,
    rows: Vec<(usize, csv::StringRecord)>,
}

fn read_table(text: &str, panel: &Panel) -> Result<Table> {
    if text.trim().is_empty() {
        return Err(Error::EmptyFile);
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(text))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let names: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut columns = Vec::with_capacity(names.len());
    let mut seen = vec![false; panel.len()];
    for name in &names {
        let idx = panel
            .index_of(name)
            .ok_or_else(|| Error::UnknownLocus(name.clone()))?;
        if seen[idx] {
            return Err(Error::Parse {
                line: 1,
                column: name.clone(),
                message: "locus appears twice in the header".into(),
            });
        }
        seen[idx] = true;
        columns.push(idx);
    }
    let missing: Vec<String> = panel
        .loci()
        .iter()
        .zip(&seen)
        .filter(|(_, &s)| !s)
        .map(|(l, _)| l.name.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingLoci(missing));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        rows.push((line, record));
    }
    if rows.is_empty() {
        return Err(Error::EmptyFile);
    }
    Ok(Table {
        columns,
        names,
        rows,
    })
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na")
}

fn parse_allele(cell: &str, line: usize, column: &str) -> Result<i32> {
    cell.parse::<i32>().map_err(|_| {
        if cell.contains('.') && cell.parse::<f64>().is_ok() {
            Error::IntermediateAllele {
                line,
                column: column.to_string(),
                value: cell.to_string(),
            }
        } else {
            Error::Parse {
                line,
                column: column.to_string(),
                message: format!("`{cell}` is not an integer allele"),
            }
        }
    })
}

pub fn parse_haplotypes(text: &str, panel: &Panel) -> Result<Vec<Haplotype>> {
    let table = read_table(text, panel)?;
    table
        .rows
        .iter()
        .map(|(line, record)| {
            let mut alleles = vec![None; panel.len()];
            for ((cell, &locus), name) in record.iter().zip(&table.columns).zip(&table.names) {
                if !is_missing(cell) {
                    alleles[locus] = Some(parse_allele(cell, *line, name)?);
                }
            }
            Haplotype::new(alleles).map_err(|_| Error::Parse {
                line: *line,
                column: "*".into(),
                message: "row has no observed loci".into(),
            })
        })
        .collect()
}

pub fn parse_database(text: &str, panel: &Panel) -> Result<HaplotypeDatabase> {
    HaplotypeDatabase::new(panel.clone(), parse_haplotypes(text, panel)?)
}

pub fn read_database(path: impl AsRef<Path>, panel: &Panel) -> Result<HaplotypeDatabase> {
    parse_database(&fs::read_to_string(path)?, panel)
}

/// A single profile: the file must hold exactly one data row.
pub fn parse_profile(text: &str, panel: &Panel) -> Result<Haplotype> {
    let mut rows = parse_haplotypes(text, panel)?;
    if rows.len() != 1 {
        return Err(Error::Parse {
            line: 0,
            column: "*".into(),
            message: format!("expected one profile row, found {}", rows.len()),
        });
    }
    Ok(rows.remove(0))
}

pub fn read_profile(path: impl AsRef<Path>, panel: &Panel) -> Result<Haplotype> {
    parse_profile(&fs::read_to_string(path)?, panel)
}

pub fn parse_mixture(text: &str, panel: &Panel) -> Result<MixtureProfile> {
    let table = read_table(text, panel)?;
    if table.rows.len() != 1 {
        return Err(Error::Parse {
            line: 0,
            column: "*".into(),
            message: format!("expected one mixture row, found {}", table.rows.len()),
        });
    }
    let (line, record) = &table.rows[0];
    let mut alleles: Vec<Vec<i32>> = vec![Vec::new(); panel.len()];
    for ((cell, &locus), name) in record.iter().zip(&table.columns).zip(&table.names) {
        if is_missing(cell) {
            continue;
        }
        for part in cell.split('/') {
            alleles[locus].push(parse_allele(part.trim(), *line, name)?);
        }
    }
    MixtureProfile::from_locus_alleles(panel, alleles)
}

pub fn read_mixture(path: impl AsRef<Path>, panel: &Panel) -> Result<MixtureProfile> {
    parse_mixture(&fs::read_to_string(path)?, panel)
}

/// Two columns `g,prob`; a non-numeric first row is taken as a header.
pub fn parse_gdistribution(text: &str) -> Result<GDistribution> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(text))
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut support = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 1;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                column: "*".into(),
                message: format!("expected 2 columns, found {}", record.len()),
            });
        }
        let g = record[0].parse::<u32>();
        let p = record[1].parse::<f64>();
        match (g, p) {
            (Ok(g), Ok(p)) => support.push((g, p)),
            _ if i == 0 => continue,
            (Err(_), _) => {
                return Err(Error::Parse {
                    line,
                    column: "g".into(),
                    message: format!("`{}` is not a positive integer", &record[0]),
                })
            }
            (_, Err(_)) => {
                return Err(Error::Parse {
                    line,
                    column: "prob".into(),
                    message: format!("`{}` is not a number", &record[1]),
                })
            }
        }
    }
    if support.is_empty() {
        return Err(Error::EmptyFile);
    }
    GDistribution::new(support)
}

pub fn read_gdistribution(path: impl AsRef<Path>) -> Result<GDistribution> {
    parse_gdistribution(&fs::read_to_string(path)?)
}

pub fn format_gdistribution(dist: &GDistribution) -> String {
    let mut out = String::from("g,prob\n");
    for &(g, p) in dist.support() {
        out.push_str(&format!("{g},{p}\n"));
    }
    out
}

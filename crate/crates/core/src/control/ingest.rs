use std::fs;
use std::path::Path;

use chrono::{Days, NaiveDate};

use crate::error::{Error, Result};
use crate::model::{ActionLevel, VaccinationStream};

pub const ICU_FILE: &str = "icu.csv";
pub const VACCINATION_FILE: &str = "vaccinations.csv";
pub const NPI_FILE: &str = "npi_timeline.csv";

/// Daily series aligned on a common date index.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    pub start: NaiveDate,
    pub icu: Vec<u64>,
    pub vax: VaccinationStream,
    pub actions: Vec<ActionLevel>,
}

impl DataSet {
    pub fn len(&self) -> usize {
        self.icu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.icu.is_empty()
    }

    pub fn date(&self, day: usize) -> NaiveDate {
        self.start + Days::new(day as u64)
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

fn parse_error(file: &str, message: impl Into<String>) -> Error {
    Error::Parse { file: file.to_string(), message: message.into() }
}

/// Rows of a CSV with the exact `header`, each a date followed by
/// unsigned integers.
fn parse_rows(file: &str, text: &str, header: &[&str]) -> Result<Vec<(NaiveDate, Vec<u64>)>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let found = reader.headers().map_err(|e| parse_error(file, e.to_string()))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(parse_error(file, format!("expected header '{}', found '{}'", header.join(","), found.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows: Vec<(NaiveDate, Vec<u64>)> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_error(file, e.to_string()))?;
        let row = line + 2;
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
            .map_err(|e| parse_error(file, format!("row {row}: bad date '{}': {e}", &record[0])))?;
        let values = (1..header.len())
            .map(|i| {
                record[i]
                    .parse::<u64>()
                    .map_err(|_| parse_error(file, format!("row {row}: '{}' is not a nonnegative integer", &record[i])))
            })
            .collect::<Result<Vec<u64>>>()?;
        if let Some((prev, _)) = rows.last() {
            if date <= *prev {
                return Err(parse_error(file, format!("row {row}: dates must be strictly increasing")));
            }
        }
        rows.push((date, values));
    }
    Ok(rows)
}

/// Reads `icu.csv`, `vaccinations.csv` and `npi_timeline.csv` from `dir`.
///
/// The NPI file lists change points, each level holding until the next row.
/// The result covers the days where ICU data and an NPI level both exist.
/// Vaccination days without a row count as zero doses; a missing ICU day
/// is an error.
pub fn ingest(dir: &Path) -> Result<DataSet> {
    let icu_text = read(&dir.join(ICU_FILE))?;
    let vax_text = read(&dir.join(VACCINATION_FILE))?;
    let npi_text = read(&dir.join(NPI_FILE))?;

    let icu = parse_rows(ICU_FILE, &icu_text, &["date", "icu_occupancy"])?;
    let npi = parse_rows(NPI_FILE, &npi_text, &["date", "action_level"])?;
    let vax = if vax_text.trim().is_empty() {
        log::warn!("{VACCINATION_FILE} is empty; assuming no vaccinations");
        Vec::new()
    } else {
        parse_rows(VACCINATION_FILE, &vax_text, &["date", "daily_first", "daily_second"])?
    };
    if vax.is_empty() && !vax_text.trim().is_empty() {
        log::warn!("{VACCINATION_FILE} has no rows; assuming no vaccinations");
    }

    for w in icu.windows(2) {
        if w[0].0.succ_opt() != Some(w[1].0) {
            return Err(Error::DateMisalignment(format!("{ICU_FILE} has a gap between {} and {}", w[0].0, w[1].0)));
        }
    }
    let (Some(icu_first), Some(icu_last)) = (icu.first(), icu.last()) else {
        return Err(parse_error(ICU_FILE, "no rows"));
    };
    let Some(npi_first) = npi.first() else {
        return Err(parse_error(NPI_FILE, "no rows"));
    };
    let start = icu_first.0.max(npi_first.0);
    let end = icu_last.0;
    if start > end {
        return Err(Error::DateMisalignment(format!(
            "{ICU_FILE} ends on {end} before {NPI_FILE} starts on {}",
            npi_first.0
        )));
    }
    let days = (end - start).num_days() as usize + 1;
    let offset = (start - icu_first.0).num_days() as usize;
    let icu_series: Vec<u64> = icu[offset..offset + days].iter().map(|(_, v)| v[0]).collect();

    let mut actions = Vec::with_capacity(days);
    let mut cursor = 0;
    for d in 0..days {
        let date = start + Days::new(d as u64);
        while cursor + 1 < npi.len() && npi[cursor + 1].0 <= date {
            cursor += 1;
        }
        let level = npi[cursor].1[0];
        actions.push(
            ActionLevel::new(level as i64)
                .map_err(|_| parse_error(NPI_FILE, format!("action level {level} outside 1..=4")))?,
        );
    }

    let mut first = vec![0; days];
    let mut second = vec![0; days];
    for (date, v) in &vax {
        if *date >= start && *date <= end {
            let d = (*date - start).num_days() as usize;
            first[d] = v[0];
            second[d] = v[1];
        }
    }
    Ok(DataSet { start, icu: icu_series, vax: VaccinationStream::new(first, second)?, actions })
}

/// Writes the canonical form of `data`: one ICU and one vaccination row per
/// day, and NPI rows only where the level changes.
pub fn write_canonical(data: &DataSet, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut icu = String::from("date,icu_occupancy\n");
    let mut vax = String::from("date,daily_first,daily_second\n");
    let mut npi = String::from("date,action_level\n");
    let mut last: Option<ActionLevel> = None;
    for d in 0..data.len() {
        let date = data.date(d).format("%Y-%m-%d");
        icu.push_str(&format!("{date},{}\n", data.icu[d]));
        let (f, s) = data.vax.get(d as u32)?;
        vax.push_str(&format!("{date},{f},{s}\n"));
        if last != Some(data.actions[d]) {
            npi.push_str(&format!("{date},{}\n", data.actions[d]));
            last = Some(data.actions[d]);
        }
    }
    fs::write(dir.join(ICU_FILE), icu)?;
    fs::write(dir.join(VACCINATION_FILE), vax)?;
    fs::write(dir.join(NPI_FILE), npi)?;
    Ok(())
}

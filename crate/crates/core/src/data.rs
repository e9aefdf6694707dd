//! Daily case-count ingestion and the series derived from it.
//!
//! Input files are UTF-8 CSV with the exact header
//! `date,new_infected,new_recovered,new_dead`, one row per contiguous
//! ISO-8601 day. Cumulative series start from zero at the first row.

use std::path::Path;

use chrono::NaiveDate;
use thiserror::Error;

pub const HEADER: [&str; 4] = ["date", "new_infected", "new_recovered", "new_dead"];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("header must be `{}`, found `{found}`", HEADER.join(","))]
    Header { found: String },
    #[error("row {row}: {message}")]
    Malformed { row: usize, message: String },
    #[error("row {row}: negative count in column {column}")]
    NegativeCount { row: usize, column: &'static str },
    #[error("row {row}: gap in dates, expected {expected} but found {found}")]
    Gap {
        row: usize,
        expected: NaiveDate,
        found: NaiveDate,
    },
    #[error("row {row}: current infected would be negative ({value})")]
    NegativeCurrent { row: usize, value: f64 },
    #[error("series has {len} days, at least {needed} are required")]
    TooShort { len: usize, needed: usize },
    #[error("population must be positive, got {0}")]
    Population(f64),
}

/// Dated daily counts and the cumulative and current series derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseSeries {
    pub dates: Vec<NaiveDate>,
    pub new_infected: Vec<f64>,
    pub new_recovered: Vec<f64>,
    pub new_dead: Vec<f64>,
    pub new_removed: Vec<f64>,
    pub cum_infected: Vec<f64>,
    /// Cumulative removed cases, which is also the current removed compartment.
    pub cum_removed: Vec<f64>,
    pub current_infected: Vec<f64>,
}

fn running_sum(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

impl CaseSeries {
    /// Builds a series from daily-new columns and computes the derived ones.
    pub fn from_daily(
        dates: Vec<NaiveDate>,
        new_infected: Vec<f64>,
        new_recovered: Vec<f64>,
        new_dead: Vec<f64>,
    ) -> Self {
        let mut s = CaseSeries {
            dates,
            new_infected,
            new_recovered,
            new_dead,
            new_removed: Vec::new(),
            cum_infected: Vec::new(),
            cum_removed: Vec::new(),
            current_infected: Vec::new(),
        };
        s.recompute_derived();
        s
    }

    pub fn recompute_derived(&mut self) {
        self.new_removed = self
            .new_recovered
            .iter()
            .zip(&self.new_dead)
            .map(|(r, d)| r + d)
            .collect();
        self.cum_infected = running_sum(&self.new_infected);
        self.cum_removed = running_sum(&self.new_removed);
        self.current_infected = self
            .cum_infected
            .iter()
            .zip(&self.cum_removed)
            .map(|(c, r)| c - r)
            .collect();
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn start_date(&self) -> Option<NaiveDate> {
        self.dates.first().copied()
    }

    /// First row at which the current infected count is negative.
    fn check_current(&self) -> Result<(), DataError> {
        match self.current_infected.iter().position(|v| *v < 0.0) {
            Some(i) => Err(DataError::NegativeCurrent {
                row: i + 1,
                value: self.current_infected[i],
            }),
            None => Ok(()),
        }
    }
}

fn parse_count(field: &str, row: usize, column: &'static str) -> Result<f64, DataError> {
    let v: i64 = field.trim().parse().map_err(|_| DataError::Malformed {
        row,
        message: format!("{column} `{field}` is not an integer"),
    })?;
    if v < 0 {
        return Err(DataError::NegativeCount { row, column });
    }
    Ok(v as f64)
}

/// Parses case counts from any reader. Row numbers in errors count data rows from 1.
pub fn ingest_reader<R: std::io::Read>(reader: R) -> Result<CaseSeries, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| DataError::Malformed {
        row: 0,
        message: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(DataError::Header {
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let (mut dates, mut inf, mut rec, mut dead) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| DataError::Malformed {
            row,
            message: e.to_string(),
        })?;
        if record.len() != 4 {
            return Err(DataError::Malformed {
                row,
                message: format!("expected 4 fields, found {}", record.len()),
            });
        }
        let date = NaiveDate::parse_from_str(record[0].trim(), "%Y-%m-%d").map_err(|_| {
            DataError::Malformed {
                row,
                message: format!("`{}` is not an ISO-8601 date", &record[0]),
            }
        })?;
        if let Some(prev) = dates.last().copied() {
            let expected = prev + chrono::Days::new(1);
            if date != expected {
                return Err(DataError::Gap {
                    row,
                    expected,
                    found: date,
                });
            }
        }
        dates.push(date);
        inf.push(parse_count(&record[1], row, "new_infected")?);
        rec.push(parse_count(&record[2], row, "new_recovered")?);
        dead.push(parse_count(&record[3], row, "new_dead")?);
    }
    if dates.is_empty() {
        return Err(DataError::TooShort { len: 0, needed: 1 });
    }
    let series = CaseSeries::from_daily(dates, inf, rec, dead);
    series.check_current()?;
    Ok(series)
}

pub fn ingest(path: impl AsRef<Path>) -> Result<CaseSeries, DataError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ingest_reader(std::io::BufReader::new(file))
}

pub const AVERAGING_WINDOW: usize = 7;

fn trailing_mean(xs: &[f64], window: usize) -> Vec<f64> {
    xs.windows(window)
        .map(|w| w.iter().sum::<f64>() / window as f64)
        .collect()
}

/// Replaces each daily-new column by its trailing seven-day mean. The output
/// starts on the seventh input day.
pub fn seven_day_average(series: &CaseSeries) -> Result<CaseSeries, DataError> {
    if series.len() < AVERAGING_WINDOW {
        return Err(DataError::TooShort {
            len: series.len(),
            needed: AVERAGING_WINDOW,
        });
    }
    Ok(CaseSeries::from_daily(
        series.dates[AVERAGING_WINDOW - 1..].to_vec(),
        trailing_mean(&series.new_infected, AVERAGING_WINDOW),
        trailing_mean(&series.new_recovered, AVERAGING_WINDOW),
        trailing_mean(&series.new_dead, AVERAGING_WINDOW),
    ))
}

/// Loss-ready series on the day nodes `1..=N_u`, in units of the population.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingData {
    pub population: f64,
    pub start_date: Option<NaiveDate>,
    pub days: Vec<f64>,
    pub new_infected: Vec<f64>,
    pub cum_infected: Vec<f64>,
    pub new_removed: Vec<f64>,
    pub removed: Vec<f64>,
    pub current_infected: Vec<f64>,
}

impl TrainingData {
    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn denormalize(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|v| v * self.population).collect()
    }

    /// Calendar date of day node `t` (1-based), when the series was dated.
    pub fn date_of(&self, day: usize) -> Option<NaiveDate> {
        self.start_date
            .map(|d| d + chrono::Days::new(day.saturating_sub(1) as u64))
    }
}

pub fn to_training_arrays(series: &CaseSeries, population: f64) -> Result<TrainingData, DataError> {
    if !(population > 0.0 && population.is_finite()) {
        return Err(DataError::Population(population));
    }
    if series.is_empty() {
        return Err(DataError::TooShort { len: 0, needed: 1 });
    }
    let scale = |xs: &[f64]| xs.iter().map(|v| v / population).collect::<Vec<_>>();
    Ok(TrainingData {
        population,
        start_date: series.start_date(),
        days: (1..=series.len()).map(|d| d as f64).collect(),
        new_infected: scale(&series.new_infected),
        cum_infected: scale(&series.cum_infected),
        new_removed: scale(&series.new_removed),
        removed: scale(&series.cum_removed),
        current_infected: scale(&series.current_infected),
    })
}

/// Writes a series in the input CSV format. Counts are rounded to integers.
pub fn write_csv<W: std::io::Write>(series: &CaseSeries, writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    for i in 0..series.len() {
        w.write_record([
            series.dates[i].format("%Y-%m-%d").to_string(),
            format!("{}", series.new_infected[i].round() as i64),
            format!("{}", series.new_recovered[i].round() as i64),
            format!("{}", series.new_dead[i].round() as i64),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn days_from(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
        (0..n).map(|i| start + chrono::Days::new(i as u64)).collect()
    }

    #[test]
    fn running_sums_and_removed() {
        let csv = "date,new_infected,new_recovered,new_dead\n\
                   2022-03-01,5,1,0\n2022-03-02,0,1,2\n2022-03-03,2,0,0\n";
        let s = ingest_reader(csv.as_bytes()).unwrap();
        assert_eq!(s.cum_infected, vec![5.0, 5.0, 7.0]);
        assert_eq!(&s.new_removed[..2], &[1.0, 3.0]);
        assert_eq!(s.cum_removed, vec![1.0, 4.0, 4.0]);
        assert_eq!(s.current_infected, vec![4.0, 1.0, 3.0]);
    }

    #[test]
    fn gap_names_the_date() {
        let csv = "date,new_infected,new_recovered,new_dead\n\
                   2022-03-01,5,0,0\n2022-03-03,1,0,0\n";
        let err = ingest_reader(csv.as_bytes()).unwrap_err();
        match &err {
            DataError::Gap { row, expected, .. } => {
                assert_eq!(*row, 2);
                assert_eq!(*expected, ymd(2022, 3, 2));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("2022-03-02"));
    }

    #[test]
    fn negative_and_malformed_rows() {
        let neg = "date,new_infected,new_recovered,new_dead\n2022-03-01,5,-1,0\n";
        assert!(matches!(
            ingest_reader(neg.as_bytes()),
            Err(DataError::NegativeCount { row: 1, column: "new_recovered" })
        ));
        let bad = "date,new_infected,new_recovered,new_dead\n2022-03-01,5,0,0\n2022-03-02,x,0,0\n";
        assert!(matches!(
            ingest_reader(bad.as_bytes()),
            Err(DataError::Malformed { row: 2, .. })
        ));
        let short = "date,new_infected,new_recovered,new_dead\n2022-03-01,5,0\n";
        assert!(matches!(
            ingest_reader(short.as_bytes()),
            Err(DataError::Malformed { row: 1, .. })
        ));
        let date = "date,new_infected,new_recovered,new_dead\n03/01/2022,5,0,0\n";
        assert!(matches!(
            ingest_reader(date.as_bytes()),
            Err(DataError::Malformed { row: 1, .. })
        ));
    }

    #[test]
    fn header_must_match_exactly() {
        let csv = "date,infected,recovered,dead\n2022-03-01,5,0,0\n";
        assert!(matches!(ingest_reader(csv.as_bytes()), Err(DataError::Header { .. })));
    }

    #[test]
    fn removals_cannot_exceed_infections() {
        let csv = "date,new_infected,new_recovered,new_dead\n2022-03-01,1,2,0\n";
        assert!(matches!(
            ingest_reader(csv.as_bytes()),
            Err(DataError::NegativeCurrent { row: 1, .. })
        ));
    }

    #[test]
    fn average_of_constant_series() {
        let s = CaseSeries::from_daily(
            days_from(ymd(2022, 1, 1), 10),
            vec![4.0; 10],
            vec![1.0; 10],
            vec![0.5; 10],
        );
        let a = seven_day_average(&s).unwrap();
        assert_eq!(a.len(), 4);
        assert!(a.new_infected.iter().all(|v| *v == 4.0));
        assert!(a.new_dead.iter().all(|v| *v == 0.5));
        assert_eq!(a.dates[0], ymd(2022, 1, 7));
    }

    #[test]
    fn average_single_spike() {
        let s = CaseSeries::from_daily(
            days_from(ymd(2022, 1, 1), 7),
            vec![7.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.0; 7],
            vec![0.0; 7],
        );
        assert_eq!(seven_day_average(&s).unwrap().new_infected, vec![1.0]);
    }

    #[test]
    fn average_needs_a_week() {
        let s = CaseSeries::from_daily(days_from(ymd(2022, 1, 1), 6), vec![1.0; 6], vec![0.0; 6], vec![0.0; 6]);
        assert!(matches!(seven_day_average(&s), Err(DataError::TooShort { len: 6, needed: 7 })));
    }

    #[test]
    fn training_arrays_normalize() {
        let s = CaseSeries::from_daily(
            days_from(ymd(2022, 3, 1), 3),
            vec![10.0, 10.0, 10.0],
            vec![0.0, 2.0, 3.0],
            vec![0.0, 0.0, 0.0],
        );
        let td = to_training_arrays(&s, 100.0).unwrap();
        assert_eq!(td.days, vec![1.0, 2.0, 3.0]);
        assert_eq!(td.current_infected[2], 0.25);
        assert_eq!(td.denormalize(&td.current_infected), s.current_infected);
        assert_eq!(td.date_of(3), Some(ymd(2022, 3, 3)));
        assert!(to_training_arrays(&s, 0.0).is_err());
    }

    #[test]
    fn write_then_ingest() {
        let s = CaseSeries::from_daily(
            days_from(ymd(2022, 2, 27), 4),
            vec![3.0, 4.0, 9.0, 0.0],
            vec![0.0, 1.0, 1.0, 2.0],
            vec![0.0, 0.0, 1.0, 0.0],
        );
        let mut buf = Vec::new();
        write_csv(&s, &mut buf).unwrap();
        assert_eq!(ingest_reader(buf.as_slice()).unwrap(), s);
    }
}

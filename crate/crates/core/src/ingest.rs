//! Hourly irradiance data: parsing, site metadata, time handling and
//! per-month grouping.
//!
//! The expected CSV schema (header required) is
//! `date,hour,ghi_wm2,temp_c` with `date` as `YYYY-MM-DD`, `hour` the start
//! of the hour in 0-23, `ghi_wm2` the global horizontal irradiance in W/m2
//! and `temp_c` an optional ambient temperature (may be empty). Site
//! metadata is supplied separately, not embedded in the CSV.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Months in which a fixed-rule daylight-savings shift of +1 h applies,
/// inclusive on both ends. Used only when the input timestamps do not
/// already include the shift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DstRule {
    pub start_month: u32,
    pub end_month: u32,
}

impl Default for DstRule {
    fn default() -> Self {
        DstRule {
            start_month: 4,
            end_month: 10,
        }
    }
}

impl DstRule {
    pub fn active(&self, month: u32) -> bool {
        month >= self.start_month && month <= self.end_month
    }
}

/// Installation-site metadata: geographic coordinates, time-zone offset and
/// the daylight-savings convention of the input timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteConfig {
    /// Latitude in degrees, positive North, in [-90, 90].
    pub latitude_deg: f64,
    /// Longitude in degrees, positive East, in [-180, 180].
    pub longitude_deg: f64,
    /// Time-zone offset from UTC in hours, in [-12, 14].
    pub utc_offset_h: f64,
    /// Whether input timestamps already include the daylight-savings shift.
    /// When false, [`DstRule`] is applied to obtain the adjusted time t'.
    pub dst_adjusted: bool,
    #[serde(default)]
    pub dst_rule: DstRule,
}

impl SiteConfig {
    pub fn validate(&self) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.latitude_deg) {
            return Err(Error::InvalidConfig(format!(
                "latitude {} outside [-90, 90]",
                self.latitude_deg
            )));
        }
        if !(-180.0..=180.0).contains(&self.longitude_deg) {
            return Err(Error::InvalidConfig(format!(
                "longitude {} outside [-180, 180]",
                self.longitude_deg
            )));
        }
        if !(-12.0..=14.0).contains(&self.utc_offset_h) {
            return Err(Error::InvalidConfig(format!(
                "UTC offset {} outside [-12, 14]",
                self.utc_offset_h
            )));
        }
        let r = self.dst_rule;
        if !(1..=12).contains(&r.start_month) || !(1..=12).contains(&r.end_month) {
            return Err(Error::InvalidConfig("DST rule months outside 1..12".into()));
        }
        Ok(())
    }

    /// Local time adjusted for daylight savings (t'). Timestamps that do not
    /// already carry the shift get +1 h during the configured months.
    pub fn adjusted_time(&self, local_time_h: f64, month: u32) -> f64 {
        if !self.dst_adjusted && self.dst_rule.active(month) {
            local_time_h + 1.0
        } else {
            local_time_h
        }
    }
}

/// One hourly irradiance observation with a local timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadianceRecord {
    pub year: i32,
    /// Day number in the year, 1 = January 1st.
    pub day_of_year: u32,
    /// Local time in hours, [0, 24).
    pub local_time_h: f64,
    /// Global horizontal irradiance in W/m2, >= 0.
    pub irradiance_wm2: f64,
    pub ambient_temp_c: Option<f64>,
}

impl RadianceRecord {
    pub fn date(&self) -> NaiveDate {
        NaiveDate::from_yo_opt(self.year, self.day_of_year)
            .expect("day_of_year valid for year by construction")
    }

    pub fn month(&self) -> u32 {
        self.date().month()
    }

    /// Hours since the calendar epoch, used to detect gaps between samples.
    pub fn absolute_hour(&self) -> f64 {
        self.date().num_days_from_ce() as f64 * 24.0 + self.local_time_h
    }
}

/// A time-ordered, site-tagged collection of irradiance records.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub site: SiteConfig,
    pub records: Vec<RadianceRecord>,
    pub source_label: String,
}

impl Dataset {
    /// Builds a dataset, checking that records are strictly increasing in
    /// time with no duplicates.
    pub fn new(
        site: SiteConfig,
        records: Vec<RadianceRecord>,
        source_label: String,
    ) -> Result<Self> {
        for (i, pair) in records.windows(2).enumerate() {
            if pair[1].absolute_hour() <= pair[0].absolute_hour() {
                // the offending record is pair[1]: data row i+1, file line i+3
                return Err(Error::NonMonotoneTimestamps { line: i as u64 + 3 });
            }
        }
        Ok(Dataset {
            site,
            records,
            source_label,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Calendar months (1-12) present in the dataset, ascending.
    pub fn months_present(&self) -> Vec<u32> {
        let mut months: Vec<u32> = self.records.iter().map(|r| r.month()).collect();
        months.sort_unstable();
        months.dedup();
        months
    }
}

const CSV_HEADER: [&str; 4] = ["date", "hour", "ghi_wm2", "temp_c"];

/// Parses an hourly irradiance CSV into a [`Dataset`].
///
/// Rows with negative irradiance, malformed fields or non-monotone
/// timestamps are rejected with the offending line number.
pub fn parse_csv(path: &Path, site: SiteConfig) -> Result<Dataset> {
    site.validate()?;
    let file = File::open(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    {
        let headers = reader.headers().map_err(|e| Error::MalformedRow {
            line: 1,
            msg: e.to_string(),
        })?;
        let got: Vec<&str> = headers.iter().collect();
        if got != CSV_HEADER {
            return Err(Error::MalformedRow {
                line: 1,
                msg: format!(
                    "expected header {:?}, got {:?}",
                    CSV_HEADER.join(","),
                    got.join(",")
                ),
            });
        }
    }

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::MalformedRow {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        records.push(parse_row(&row, line)?);
    }

    if records.is_empty() {
        return Err(Error::EmptyFile {
            path: path.display().to_string(),
        });
    }

    let label = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Dataset::new(site, records, label)
}

fn parse_row(row: &csv::StringRecord, line: u64) -> Result<RadianceRecord> {
    let field = |i: usize| -> Result<&str> {
        row.get(i).ok_or_else(|| Error::MalformedRow {
            line,
            msg: format!("missing column {}", CSV_HEADER[i]),
        })
    };

    let date =
        NaiveDate::parse_from_str(field(0)?, "%Y-%m-%d").map_err(|e| Error::MalformedRow {
            line,
            msg: format!("bad date: {e}"),
        })?;
    let hour: u32 = field(1)?.parse().map_err(|_| Error::MalformedRow {
        line,
        msg: format!("bad hour {:?}", field(1).unwrap_or("")),
    })?;
    if hour > 23 {
        return Err(Error::MalformedRow {
            line,
            msg: format!("hour {hour} outside 0-23"),
        });
    }
    let irradiance: f64 = field(2)?.parse().map_err(|_| Error::MalformedRow {
        line,
        msg: format!("bad irradiance {:?}", field(2).unwrap_or("")),
    })?;
    if !irradiance.is_finite() {
        return Err(Error::MalformedRow {
            line,
            msg: "non-finite irradiance".into(),
        });
    }
    if irradiance < 0.0 {
        return Err(Error::NegativeIrradiance {
            line,
            value: irradiance,
        });
    }
    let temp = field(3)?;
    let ambient_temp_c = if temp.is_empty() {
        None
    } else {
        Some(temp.parse().map_err(|_| Error::MalformedRow {
            line,
            msg: format!("bad temperature {temp:?}"),
        })?)
    };

    Ok(RadianceRecord {
        year: date.year(),
        day_of_year: date.ordinal(),
        local_time_h: hour as f64,
        irradiance_wm2: irradiance,
        ambient_temp_c,
    })
}

/// Writes a dataset back to the CSV schema accepted by [`parse_csv`].
pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", CSV_HEADER.join(","))?;
    for rec in &ds.records {
        let temp = rec
            .ambient_temp_c
            .map(|t| t.to_string())
            .unwrap_or_default();
        // CSV-born data has integral hours; anything else keeps full precision.
        let hour = if rec.local_time_h.fract() == 0.0 {
            format!("{}", rec.local_time_h as i64)
        } else {
            rec.local_time_h.to_string()
        };
        writeln!(
            out,
            "{},{},{},{}",
            rec.date().format("%Y-%m-%d"),
            hour,
            rec.irradiance_wm2,
            temp
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Splits a dataset into per-calendar-month datasets (across all years).
/// Empty months are simply absent from the map.
pub fn group_by_month(ds: &Dataset) -> Result<BTreeMap<u32, Dataset>> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut groups: BTreeMap<u32, Vec<RadianceRecord>> = BTreeMap::new();
    for rec in &ds.records {
        groups.entry(rec.month()).or_default().push(*rec);
    }
    Ok(groups
        .into_iter()
        .map(|(month, records)| {
            (
                month,
                Dataset {
                    site: ds.site,
                    records,
                    source_label: ds.source_label.clone(),
                },
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn test_site() -> SiteConfig {
        SiteConfig {
            latitude_deg: 34.05,
            longitude_deg: -118.25,
            utc_offset_h: -8.0,
            dst_adjusted: false,
            dst_rule: DstRule::default(),
        }
    }

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn single_row_maps_fields() {
        let f = write_temp("date,hour,ghi_wm2,temp_c\n1999-07-01,12,950.0,25.0\n");
        let ds = parse_csv(f.path(), test_site()).unwrap();
        assert_eq!(ds.len(), 1);
        let rec = ds.records[0];
        assert_eq!(rec.year, 1999);
        assert_eq!(rec.day_of_year, 182);
        assert_eq!(rec.local_time_h, 12.0);
        assert_eq!(rec.irradiance_wm2, 950.0);
        assert_eq!(rec.ambient_temp_c, Some(25.0));
    }

    #[test]
    fn negative_irradiance_names_line() {
        let f = write_temp("date,hour,ghi_wm2,temp_c\n1999-07-01,11,100,\n1999-07-01,12,-5,\n");
        match parse_csv(f.path(), test_site()) {
            Err(Error::NegativeIrradiance { line, value }) => {
                assert_eq!(line, 3);
                assert_eq!(value, -5.0);
            }
            other => panic!("expected NegativeIrradiance, got {other:?}"),
        }
    }

    #[test]
    fn empty_temperature_is_none() {
        let f = write_temp("date,hour,ghi_wm2,temp_c\n1999-07-01,12,950.0,\n");
        let ds = parse_csv(f.path(), test_site()).unwrap();
        assert_eq!(ds.records[0].ambient_temp_c, None);
    }

    #[test]
    fn empty_file_rejected() {
        let f = write_temp("date,hour,ghi_wm2,temp_c\n");
        assert!(matches!(
            parse_csv(f.path(), test_site()),
            Err(Error::EmptyFile { .. })
        ));
    }

    #[test]
    fn non_monotone_rejected() {
        let f =
            write_temp("date,hour,ghi_wm2,temp_c\n1999-07-01,12,950.0,\n1999-07-01,12,940.0,\n");
        assert!(matches!(
            parse_csv(f.path(), test_site()),
            Err(Error::NonMonotoneTimestamps { line: 3 })
        ));
    }

    #[test]
    fn malformed_row_names_line() {
        let f = write_temp("date,hour,ghi_wm2,temp_c\n1999-07-01,12,950.0,\nnot-a-date,1,2,\n");
        match parse_csv(f.path(), test_site()) {
            Err(Error::MalformedRow { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected MalformedRow, got {other:?}"),
        }
    }

    #[test]
    fn bad_header_rejected() {
        let f = write_temp("when,hour,ghi,t\n1999-07-01,12,950.0,\n");
        assert!(matches!(
            parse_csv(f.path(), test_site()),
            Err(Error::MalformedRow { line: 1, .. })
        ));
    }

    #[test]
    fn hourly_file_row_count_matches_line_count() {
        // Independent oracle: the dataset length must equal the number of
        // data lines written, here 3 full days.
        let mut content = String::from("date,hour,ghi_wm2,temp_c\n");
        let mut lines = 0u32;
        for day in 1..=3 {
            for hour in 0..24 {
                content.push_str(&format!("2000-01-0{day},{hour},{},\n", hour * 10));
                lines += 1;
            }
        }
        let f = write_temp(&content);
        let ds = parse_csv(f.path(), test_site()).unwrap();
        assert_eq!(ds.len(), lines as usize);
        assert_eq!(ds.len(), 24 * 3);
    }

    #[test]
    fn csv_round_trip_is_identical() {
        let f = write_temp(
            "date,hour,ghi_wm2,temp_c\n1999-07-01,12,950.125,25.5\n1999-07-01,13,875.0,\n2000-02-29,0,0,1.25\n",
        );
        let ds = parse_csv(f.path(), test_site()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_csv(&ds, out.path()).unwrap();
        let ds2 = parse_csv(out.path(), test_site()).unwrap();
        assert_eq!(ds.site, ds2.site);
        assert_eq!(ds.records, ds2.records);
    }

    #[test]
    fn group_by_month_spans_years() {
        let f = write_temp(
            "date,hour,ghi_wm2,temp_c\n1999-01-05,12,100,\n1999-06-05,12,200,\n2000-01-05,12,300,\n",
        );
        let ds = parse_csv(f.path(), test_site()).unwrap();
        let groups = group_by_month(&ds).unwrap();
        assert_eq!(groups[&1].len(), 2);
        assert_eq!(groups[&6].len(), 1);
        assert_eq!(groups.len(), 2);
    }

    #[test]
    fn group_by_month_partitions() {
        let mut content = String::from("date,hour,ghi_wm2,temp_c\n");
        for month in 1..=12 {
            content.push_str(&format!("2001-{month:02}-10,12,{},\n", month * 10));
        }
        let f = write_temp(&content);
        let ds = parse_csv(f.path(), test_site()).unwrap();
        let groups = group_by_month(&ds).unwrap();
        assert_eq!(groups.len(), 12);
        let total: usize = groups.values().map(|g| g.len()).sum();
        assert_eq!(total, ds.len());
        for (month, group) in &groups {
            assert_eq!(group.len(), 1);
            assert!(group.records.iter().all(|r| r.month() == *month));
        }
    }

    #[test]
    fn full_year_group_sizes_match_calendar() {
        // Independent calendar count: group sizes must be 24 x days-in-month.
        let mut content = String::from("date,hour,ghi_wm2,temp_c\n");
        let mut date = NaiveDate::from_ymd_opt(2001, 1, 1).unwrap();
        while date.year() == 2001 {
            for hour in 0..24 {
                content.push_str(&format!("{},{hour},50,\n", date.format("%Y-%m-%d")));
            }
            date = date.succ_opt().unwrap();
        }
        let f = write_temp(&content);
        let ds = parse_csv(f.path(), test_site()).unwrap();
        let groups = group_by_month(&ds).unwrap();
        let days_2001 = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];
        for (month, days) in days_2001.iter().enumerate() {
            assert_eq!(groups[&(month as u32 + 1)].len(), 24 * days);
        }
    }

    #[test]
    fn dst_rule_shifts_only_unadjusted_sites() {
        let mut site = test_site();
        site.dst_adjusted = false;
        assert_eq!(site.adjusted_time(10.0, 7), 11.0);
        assert_eq!(site.adjusted_time(10.0, 1), 10.0);
        site.dst_adjusted = true;
        assert_eq!(site.adjusted_time(10.0, 7), 10.0);
    }

    #[test]
    fn site_validation_bounds() {
        let mut site = test_site();
        site.latitude_deg = 91.0;
        assert!(site.validate().is_err());
        let mut site = test_site();
        site.utc_offset_h = 15.0;
        assert!(site.validate().is_err());
        assert!(test_site().validate().is_ok());
    }
}

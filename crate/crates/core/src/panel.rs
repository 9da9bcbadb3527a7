//! Market panels: monthly (period, region) counts of engagements and active
//! users on each side, plus match-level records for the within-area share.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Calendar month. Ordered chronologically.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Period {
    year: i32,
    month: u8,
}

impl Period {
    pub fn new(year: i32, month: u8) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::param("month", format!("{month} is not in 1..=12")));
        }
        Ok(Period { year, month })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u8 {
        self.month
    }

    /// Months since January of year 0.
    pub fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_ordinal(ordinal: i64) -> Self {
        let year = ordinal.div_euclid(12) as i32;
        let month = ordinal.rem_euclid(12) as u8 + 1;
        Period { year, month }
    }

    pub fn succ(self) -> Self {
        Self::from_ordinal(self.ordinal() + 1)
    }

    pub fn pred(self) -> Self {
        Self::from_ordinal(self.ordinal() - 1)
    }

    pub fn plus_months(self, n: i64) -> Self {
        Self::from_ordinal(self.ordinal() + n)
    }

    /// Signed number of months from `self` to `later`.
    pub fn months_until(self, later: Period) -> i64 {
        later.ordinal() - self.ordinal()
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for Period {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::param("period", format!("`{s}` is not YYYY-MM"));
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        let year = y.parse().map_err(|_| bad())?;
        let month = m.parse().map_err(|_| bad())?;
        Period::new(year, month)
    }
}

/// Region label of a panel row; `None` is the national aggregate.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RegionKey(pub Option<String>);

impl fmt::Display for RegionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Some(r) => f.write_str(r),
            None => f.write_str("national"),
        }
    }
}

/// One (period, region) row of counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarketObservation {
    pub period: Period,
    pub region: Option<String>,
    pub engagements: u64,
    pub females: u64,
    pub males: u64,
}

impl MarketObservation {
    pub fn new(
        period: Period,
        region: Option<String>,
        engagements: u64,
        females: u64,
        males: u64,
    ) -> Result<Self> {
        let obs = MarketObservation {
            period,
            region,
            engagements,
            females,
            males,
        };
        obs.check()
            .map_err(|reason| Error::InvalidRow { row: 0, reason })?;
        Ok(obs)
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.females == 0 {
            return Err("F must be positive".into());
        }
        if self.males == 0 {
            return Err("M must be positive".into());
        }
        if self.engagements > self.females.min(self.males) {
            return Err("E exceeds min(F,M)".into());
        }
        Ok(())
    }

    pub fn key(&self) -> (Period, RegionKey) {
        (self.period, RegionKey(self.region.clone()))
    }

    pub fn e<T: Scalar>(&self) -> T {
        T::from_count(self.engagements)
    }

    pub fn f<T: Scalar>(&self) -> T {
        T::from_count(self.females)
    }

    pub fn m<T: Scalar>(&self) -> T {
        T::from_count(self.males)
    }
}

/// Validated panel, ordered by region (national first) and then period.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct MarketPanel {
    observations: Vec<MarketObservation>,
}

impl MarketPanel {
    /// Builds a panel, rejecting duplicate keys. Rows are re-sorted.
    pub fn from_observations(mut observations: Vec<MarketObservation>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, obs) in observations.iter().enumerate() {
            obs.check().map_err(|reason| Error::InvalidRow {
                row: i as u64 + 1,
                reason,
            })?;
            if !seen.insert(obs.key()) {
                return Err(Error::DuplicateKey {
                    period: obs.period,
                    region: RegionKey(obs.region.clone()),
                    row: i as u64 + 1,
                });
            }
        }
        observations.sort_by(|a, b| (&a.region, a.period).cmp(&(&b.region, b.period)));
        Ok(MarketPanel { observations })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[MarketObservation] {
        &self.observations
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MarketObservation> {
        self.observations.iter()
    }

    /// Distinct region labels in panel order.
    pub fn regions(&self) -> Vec<Option<String>> {
        let mut out: Vec<Option<String>> = Vec::new();
        for obs in &self.observations {
            if out.last() != Some(&obs.region) {
                out.push(obs.region.clone());
            }
        }
        out
    }

    pub fn get(&self, period: Period, region: Option<&str>) -> Option<&MarketObservation> {
        self.observations
            .iter()
            .find(|o| o.period == period && o.region.as_deref() == region)
    }

    pub fn position(&self, period: Period, region: Option<&str>) -> Option<usize> {
        self.observations
            .iter()
            .position(|o| o.period == period && o.region.as_deref() == region)
    }

    /// Multiplies every count by `factor`. Invariants are preserved.
    pub fn scaled(&self, factor: u64) -> MarketPanel {
        let observations = self
            .observations
            .iter()
            .map(|o| MarketObservation {
                engagements: o.engagements * factor,
                females: o.females * factor,
                males: o.males * factor,
                ..o.clone()
            })
            .collect();
        MarketPanel { observations }
    }

    /// Sub-panel for one region (`None` selects national rows).
    pub fn slice_region(&self, region: Option<&str>) -> Result<MarketPanel> {
        let observations: Vec<_> = self
            .observations
            .iter()
            .filter(|o| o.region.as_deref() == region)
            .cloned()
            .collect();
        if observations.is_empty() {
            return Err(Error::UnknownRegion(
                region.unwrap_or("national").to_string(),
            ));
        }
        Ok(MarketPanel { observations })
    }
}

impl<'a> IntoIterator for &'a MarketPanel {
    type Item = &'a MarketObservation;
    type IntoIter = std::slice::Iter<'a, MarketObservation>;

    fn into_iter(self) -> Self::IntoIter {
        self.observations.iter()
    }
}

/// Column names for panel files.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schema {
    pub period: String,
    /// Optional: a file without this column is a national panel.
    pub region: Option<String>,
    pub engagements: String,
    pub females: String,
    pub males: String,
    pub delimiter: u8,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            period: "ym".into(),
            region: Some("region".into()),
            engagements: "E".into(),
            females: "F".into(),
            males: "M".into(),
            delimiter: b',',
        }
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn parse_count(raw: &str, field: &'static str, row: u64) -> Result<u64> {
    raw.trim().parse::<u64>().map_err(|_| Error::Parse {
        row,
        field,
        value: raw.to_string(),
    })
}

/// Reads a delimiter-separated panel with a header row.
///
/// Row numbers in diagnostics are file line numbers (the header is line 1).
pub fn load_panel<R: Read>(source: R, schema: &Schema) -> Result<MarketPanel> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(true)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let period_col = column(&headers, &schema.period)?;
    let region_col = match &schema.region {
        Some(name) => headers.iter().position(|h| h.trim() == name.as_str()),
        None => None,
    };
    let e_col = column(&headers, &schema.engagements)?;
    let f_col = column(&headers, &schema.females)?;
    let m_col = column(&headers, &schema.males)?;

    let mut observations = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record?;
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| record.get(i).unwrap_or("");
        let period: Period = field(period_col).parse().map_err(|_| Error::Parse {
            row,
            field: "period",
            value: field(period_col).to_string(),
        })?;
        let region = region_col
            .map(|i| field(i).trim().to_string())
            .filter(|r| !r.is_empty());
        let engagements = parse_count(field(e_col), "E", row)?;
        let females = parse_count(field(f_col), "F", row)?;
        let males = parse_count(field(m_col), "M", row)?;
        let obs = MarketObservation {
            period,
            region,
            engagements,
            females,
            males,
        };
        if engagements > females.min(males) && females > 0 && males > 0 {
            return Err(Error::EngagementsExceedSupply { row });
        }
        obs.check()
            .map_err(|reason| Error::InvalidRow { row, reason })?;
        if !seen.insert(obs.key()) {
            return Err(Error::DuplicateKey {
                period,
                region: RegionKey(obs.region.clone()),
                row,
            });
        }
        observations.push(obs);
    }
    MarketPanel::from_observations(observations)
}

/// Writes a panel in the format [`load_panel`] reads.
pub fn write_panel<W: Write>(sink: W, panel: &MarketPanel, schema: &Schema) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .delimiter(schema.delimiter)
        .from_writer(sink);
    let mut header = vec![schema.period.as_str()];
    if let Some(r) = &schema.region {
        header.push(r);
    }
    header.extend([
        schema.engagements.as_str(),
        schema.females.as_str(),
        schema.males.as_str(),
    ]);
    writer.write_record(&header)?;
    for obs in panel {
        let mut row = vec![obs.period.to_string()];
        if schema.region.is_some() {
            row.push(obs.region.clone().unwrap_or_default());
        }
        row.extend([
            obs.engagements.to_string(),
            obs.females.to_string(),
            obs.males.to_string(),
        ]);
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Tightness and partner finding rates for one observation.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivedRow<T> {
    pub period: Period,
    pub region: Option<String>,
    /// F / M
    pub tightness: T,
    /// E / F
    pub female_finding_rate: T,
    /// E / M
    pub male_finding_rate: T,
}

pub type DerivedSeries<T> = Vec<DerivedRow<T>>;

pub fn derive_ratios<T: Scalar>(panel: &MarketPanel) -> Result<DerivedSeries<T>> {
    if panel.is_empty() {
        return Err(Error::Empty("panel has no observations"));
    }
    Ok(panel
        .iter()
        .map(|o| {
            let (e, f, m) = (o.e::<T>(), o.f::<T>(), o.m::<T>());
            DerivedRow {
                period: o.period,
                region: o.region.clone(),
                tightness: f / m,
                female_finding_rate: e / f,
                male_finding_rate: e / m,
            }
        })
        .collect())
}

/// A single realized match and where each party lives.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MatchRecord {
    pub period: Period,
    pub female_region: String,
    pub male_region: String,
}

/// Reads match records with columns `ym,female_region,male_region`.
pub fn load_match_records<R: Read>(source: R, delimiter: u8) -> Result<Vec<MatchRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let p = column(&headers, "ym")?;
    let fr = column(&headers, "female_region")?;
    let mr = column(&headers, "male_region")?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        let raw = record.get(p).unwrap_or("");
        let period = raw.parse().map_err(|_| Error::Parse {
            row,
            field: "period",
            value: raw.to_string(),
        })?;
        out.push(MatchRecord {
            period,
            female_region: record.get(fr).unwrap_or("").trim().to_string(),
            male_region: record.get(mr).unwrap_or("").trim().to_string(),
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Granularity {
    #[default]
    Month,
    Year,
}

/// Reporting bucket of a within-area share cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PeriodBucket {
    Month(Period),
    Year(i32),
}

impl PeriodBucket {
    fn of(period: Period, granularity: Granularity) -> Self {
        match granularity {
            Granularity::Month => PeriodBucket::Month(period),
            Granularity::Year => PeriodBucket::Year(period.year()),
        }
    }
}

impl fmt::Display for PeriodBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PeriodBucket::Month(p) => p.fmt(f),
            PeriodBucket::Year(y) => write!(f, "{y:04}"),
        }
    }
}

/// Which party's residence defines the denominator of the share.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ConditioningSide {
    #[default]
    Female,
    Male,
}

#[derive(Clone, Debug, Default)]
pub struct ShareOptions {
    pub granularity: Granularity,
    pub conditioning: ConditioningSide,
    /// Declared region vocabulary; labels outside it are rejected. `None` accepts any label.
    pub vocabulary: Option<BTreeSet<String>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShareCell {
    pub bucket: PeriodBucket,
    pub region: String,
    pub same_region: u64,
    pub total: u64,
    pub share: f64,
}

/// Within-area match share per (period bucket, region).
///
/// Cells whose conditioning-side count is zero are absent, never reported as 0.
pub fn within_area_share(
    records: &[MatchRecord],
    options: &ShareOptions,
) -> Result<Vec<ShareCell>> {
    let mut counts: BTreeMap<(PeriodBucket, &str), (u64, u64)> = BTreeMap::new();
    for rec in records {
        if let Some(vocab) = &options.vocabulary {
            for label in [&rec.female_region, &rec.male_region] {
                if !vocab.contains(label) {
                    return Err(Error::UnknownRegion(label.clone()));
                }
            }
        }
        let home = match options.conditioning {
            ConditioningSide::Female => rec.female_region.as_str(),
            ConditioningSide::Male => rec.male_region.as_str(),
        };
        let entry = counts
            .entry((PeriodBucket::of(rec.period, options.granularity), home))
            .or_default();
        entry.1 += 1;
        if rec.female_region == rec.male_region {
            entry.0 += 1;
        }
    }
    Ok(counts
        .into_iter()
        .map(|((bucket, region), (same_region, total))| ShareCell {
            bucket,
            region: region.to_string(),
            same_region,
            total,
            share: same_region as f64 / total as f64,
        })
        .collect())
}

/// Free-function form of [`MarketPanel::slice_region`].
pub fn slice_region(panel: &MarketPanel, region: Option<&str>) -> Result<MarketPanel> {
    panel.slice_region(region)
}

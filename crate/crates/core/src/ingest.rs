//! CSV ingestion for crimes, venues and venue-to-venue movements, plus the
//! roll-ups onto the grid.
//!
//! Parsers are row tolerant: a bad record is reported with its line number and
//! parsing continues. Only a missing or unreadable header aborts a file.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use chrono::NaiveDateTime;
use csv::{ByteRecord, ReaderBuilder, Trim};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{CellId, GeoPoint, GridSpec, IntervalBounds, MonthId, TimeInterval};

pub const UNKNOWN_CATEGORY: &str = "(unknown)";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub line_no: u64,
    pub reason: String,
}

impl Reject {
    fn new(line_no: u64, reason: impl Into<String>) -> Self {
        Self { line_no, reason: reason.into() }
    }
}

/// Records accepted from one input file together with the rejected rows.
#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub rejects: Vec<Reject>,
    /// Number of data rows read, header excluded.
    pub rows: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrimeEvent {
    pub ts: NaiveDateTime,
    pub loc: GeoPoint,
    pub kind: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Venue {
    pub id: String,
    pub loc: GeoPoint,
    pub category: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MovementRecord {
    pub origin_venue: String,
    pub dest_venue: String,
    pub month: MonthId,
    pub interval: TimeInterval,
    pub count: u64,
    /// Source line, 0 when the record was not read from a file.
    pub line_no: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub cell: CellId,
    pub month: MonthId,
    pub interval: TimeInterval,
}

/// Crime counts per `(cell, month, interval)`; absent keys count zero.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CellCounts {
    counts: BTreeMap<CellKey, u64>,
}

impl CellCounts {
    pub fn get(&self, cell: CellId, month: MonthId, interval: TimeInterval) -> u64 {
        self.counts.get(&CellKey { cell, month, interval }).copied().unwrap_or(0)
    }

    pub fn add(&mut self, cell: CellId, month: MonthId, interval: TimeInterval, n: u64) {
        if n > 0 {
            *self.counts.entry(CellKey { cell, month, interval }).or_default() += n;
        }
    }

    /// Multiplies every count by `k`; used by scale-covariance checks.
    pub fn scaled(&self, k: u64) -> Self {
        let counts = self.counts.iter().filter(|_| k > 0).map(|(key, &n)| (*key, n * k)).collect();
        Self { counts }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CellKey, u64)> {
        self.counts.iter().map(|(k, &n)| (k, n))
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["row", "col", "month", "interval", "crime_count"])?;
        for (k, n) in self.iter() {
            out.write_record([
                k.cell.row.to_string(),
                k.cell.col.to_string(),
                k.month.to_string(),
                k.interval.to_string(),
                n.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Key of an aggregated cell-to-cell movement. Ordered by bucket first so a
/// `(month, interval)` slice is a contiguous range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OdKey {
    pub month: MonthId,
    pub interval: TimeInterval,
    pub origin: CellId,
    pub dest: CellId,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OdAggregate {
    moves: BTreeMap<OdKey, u64>,
}

impl OdAggregate {
    pub fn add(&mut self, key: OdKey, n: u64) {
        if n > 0 {
            *self.moves.entry(key).or_default() += n;
        }
    }

    pub fn get(&self, key: &OdKey) -> u64 {
        self.moves.get(key).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&OdKey, u64)> {
        self.moves.iter().map(|(k, &n)| (k, n))
    }

    /// Entries of one `(month, interval)` bucket.
    pub fn bucket(&self, month: MonthId, interval: TimeInterval) -> impl Iterator<Item = (&OdKey, u64)> {
        let lo = OdKey { month, interval, origin: CellId::new(0, 0), dest: CellId::new(0, 0) };
        let hi =
            OdKey { month, interval, origin: CellId::new(u32::MAX, u32::MAX), dest: CellId::new(u32::MAX, u32::MAX) };
        self.moves.range(lo..=hi).map(|(k, &n)| (k, n))
    }

    /// Distinct `(month, interval)` buckets in order.
    pub fn buckets(&self) -> Vec<(MonthId, TimeInterval)> {
        let mut out: Vec<(MonthId, TimeInterval)> = Vec::new();
        for k in self.moves.keys() {
            if out.last() != Some(&(k.month, k.interval)) {
                out.push((k.month, k.interval));
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.moves.values().sum()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["month", "interval", "origin_row", "origin_col", "dest_row", "dest_col", "move_count"])?;
        for (k, n) in self.iter() {
            out.write_record([
                k.month.to_string(),
                k.interval.to_string(),
                k.origin.row.to_string(),
                k.origin.col.to_string(),
                k.dest.row.to_string(),
                k.dest.col.to_string(),
                n.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Writes a `line_no,reason` rejects report.
pub fn write_rejects<W: Write>(rejects: &[Reject], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["line_no", "reason"])?;
    for r in rejects {
        out.write_record([r.line_no.to_string(), r.reason.clone()])?;
    }
    out.flush()?;
    Ok(())
}

/// Column positions resolved from a header row.
struct Columns {
    idx: Vec<Option<usize>>,
}

impl Columns {
    fn resolve(header: &ByteRecord, required: &[&str], optional: &[&str]) -> Result<Self> {
        let names: Vec<String> = header
            .iter()
            .map(|f| {
                String::from_utf8(f.to_vec())
                    .map(|s| s.trim_start_matches('\u{feff}').trim().to_ascii_lowercase())
                    .map_err(|_| Error::FileFormat("header is not valid UTF-8".into()))
            })
            .collect::<Result<_>>()?;
        if names.iter().all(|n| n.is_empty()) {
            return Err(Error::FileFormat("missing header".into()));
        }
        let mut idx = Vec::with_capacity(required.len() + optional.len());
        for &col in required {
            let pos = names.iter().position(|n| n == col);
            if pos.is_none() {
                return Err(Error::FileFormat(format!("missing column `{col}` in header")));
            }
            idx.push(pos);
        }
        for &col in optional {
            idx.push(names.iter().position(|n| n == col));
        }
        Ok(Self { idx })
    }

    /// Field `i` of the record as trimmed UTF-8; `Ok(None)` when the column is
    /// optional and absent from the header.
    fn field<'r>(&self, rec: &'r ByteRecord, i: usize, name: &str) -> std::result::Result<Option<&'r str>, String> {
        let Some(pos) = self.idx[i] else { return Ok(None) };
        let raw = rec.get(pos).ok_or_else(|| format!("missing field `{name}`"))?;
        std::str::from_utf8(raw).map(|s| Some(s.trim())).map_err(|_| "invalid utf-8".to_string())
    }

    fn required<'r>(&self, rec: &'r ByteRecord, i: usize, name: &str) -> std::result::Result<&'r str, String> {
        self.field(rec, i, name).map(|f| f.unwrap_or_default())
    }
}

/// Drives a CSV reader over `input`, handing every data record to `row`.
fn parse_rows<R, T, F>(input: R, required: &[&str], optional: &[&str], mut row: F) -> Result<Parsed<T>>
where
    R: Read,
    F: FnMut(&Columns, &ByteRecord, u64) -> std::result::Result<T, String>,
{
    let mut rdr = ReaderBuilder::new().flexible(true).trim(Trim::All).from_reader(input);
    let header = match rdr.byte_headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(Error::FileFormat(format!("unreadable header: {e}"))),
    };
    if header.is_empty() {
        return Err(Error::FileFormat("missing header".into()));
    }
    let cols = Columns::resolve(&header, required, optional)?;
    let mut parsed = Parsed { records: Vec::new(), rejects: Vec::new(), rows: 0 };
    let mut rec = ByteRecord::new();
    loop {
        match rdr.read_byte_record(&mut rec) {
            Ok(false) => break,
            Ok(true) => {
                let line_no = rec.position().map_or(0, |p| p.line());
                parsed.rows += 1;
                match row(&cols, &rec, line_no) {
                    Ok(t) => parsed.records.push(t),
                    Err(reason) => parsed.rejects.push(Reject::new(line_no, reason)),
                }
            }
            Err(e) => match e.kind() {
                csv::ErrorKind::Io(_) => return Err(e.into()),
                _ => {
                    let line_no = e.position().map_or(0, |p| p.line());
                    parsed.rows += 1;
                    parsed.rejects.push(Reject::new(line_no, "malformed csv"));
                }
            },
        }
    }
    Ok(parsed)
}

fn parse_coord(s: &str, what: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("unparseable {what}")),
    }
}

fn parse_point(lat: &str, lon: &str) -> std::result::Result<GeoPoint, String> {
    if lat.is_empty() || lon.is_empty() {
        return Err("missing coordinates".into());
    }
    let lat = parse_coord(lat, "latitude")?;
    let lon = parse_coord(lon, "longitude")?;
    GeoPoint::new(lat, lon).map_err(|_| "invalid coordinates".to_string())
}

const DATETIME_FORMATS: [&str; 4] =
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"];

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    DATETIME_FORMATS.iter().find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

/// Parses a crime file with columns `datetime, lat, lon[, type]`. Rows
/// outside the grid's bounding box are rejected.
pub fn parse_crimes<R: Read>(input: R, grid: &GridSpec) -> Result<Parsed<CrimeEvent>> {
    parse_rows(input, &["datetime", "lat", "lon"], &["type"], |cols, rec, _| {
        let ts = cols.required(rec, 0, "datetime")?;
        let ts = parse_timestamp(ts).ok_or("unparseable datetime")?;
        let loc = parse_point(cols.required(rec, 1, "lat")?, cols.required(rec, 2, "lon")?)?;
        if !grid.contains(loc) {
            return Err("out of bounds".into());
        }
        let kind = cols.field(rec, 3, "type")?.filter(|s| !s.is_empty()).map(str::to_owned);
        Ok(CrimeEvent { ts, loc, kind })
    })
}

/// Parses a venue file with columns `venue_id, lat, lon, category`. Later
/// rows repeating an id are rejected; empty categories become `(unknown)`.
pub fn parse_venues<R: Read>(input: R) -> Result<Parsed<Venue>> {
    let mut seen = std::collections::HashSet::new();
    parse_rows(input, &["venue_id", "lat", "lon", "category"], &[], |cols, rec, _| {
        let id = cols.required(rec, 0, "venue_id")?;
        if id.is_empty() {
            return Err("empty venue id".into());
        }
        let loc = parse_point(cols.required(rec, 1, "lat")?, cols.required(rec, 2, "lon")?)?;
        let category = cols.required(rec, 3, "category")?;
        let category = if category.is_empty() { UNKNOWN_CATEGORY } else { category };
        if !seen.insert(id.to_owned()) {
            return Err("duplicate id".into());
        }
        Ok(Venue { id: id.to_owned(), loc, category: category.to_owned() })
    })
}

/// Parses a movement file with columns
/// `origin_venue, dest_venue, month, interval, count`.
pub fn parse_movements<R: Read>(input: R) -> Result<Parsed<MovementRecord>> {
    parse_rows(input, &["origin_venue", "dest_venue", "month", "interval", "count"], &[], |cols, rec, line_no| {
        let origin = cols.required(rec, 0, "origin_venue")?;
        let dest = cols.required(rec, 1, "dest_venue")?;
        if origin.is_empty() || dest.is_empty() {
            return Err("empty venue id".into());
        }
        let month: MonthId = cols.required(rec, 2, "month")?.parse().map_err(|_| "bad month")?;
        let interval: TimeInterval = cols.required(rec, 3, "interval")?.parse().map_err(|_| "unknown interval")?;
        let count = cols.required(rec, 4, "count")?;
        let count: i64 = count.parse().map_err(|_| "unparseable count")?;
        if count < 1 {
            return Err("nonpositive count".into());
        }
        Ok(MovementRecord {
            origin_venue: origin.to_owned(),
            dest_venue: dest.to_owned(),
            month,
            interval,
            count: count as u64,
            line_no,
        })
    })
}

/// Counts crimes per `(cell, month, interval)`. Events outside the grid are
/// skipped; the parser has already rejected them.
pub fn bin_crimes(crimes: &[CrimeEvent], grid: &GridSpec, bounds: &IntervalBounds) -> CellCounts {
    let mut cc = CellCounts::default();
    for c in crimes {
        if let Ok(cell) = grid.cell_of(c.loc) {
            cc.add(cell, MonthId::of_date(c.ts.date()), bounds.interval_of(&c.ts), 1);
        }
    }
    cc
}

/// A movement record that could not be placed on the grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolveReject {
    /// Position of the record in the input slice.
    pub index: usize,
    pub line_no: u64,
    pub reason: String,
}

/// Rolls venue-level movements up to cell-level origin-destination counts.
pub fn resolve_movements(
    moves: &[MovementRecord],
    venues: &[Venue],
    grid: &GridSpec,
) -> (OdAggregate, Vec<ResolveReject>) {
    let cells: HashMap<&str, Option<CellId>> =
        venues.iter().map(|v| (v.id.as_str(), grid.cell_of(v.loc).ok())).collect();
    let mut od = OdAggregate::default();
    let mut rejects = Vec::new();
    for (index, m) in moves.iter().enumerate() {
        let lookup = |id: &str| match cells.get(id) {
            None => Err("unresolved venue"),
            Some(None) => Err("venue out of bounds"),
            Some(Some(c)) => Ok(*c),
        };
        match lookup(&m.origin_venue).and_then(|o| lookup(&m.dest_venue).map(|d| (o, d))) {
            Ok((origin, dest)) => od.add(OdKey { month: m.month, interval: m.interval, origin, dest }, m.count),
            Err(reason) => rejects.push(ResolveReject { index, line_no: m.line_no, reason: reason.into() }),
        }
    }
    (od, rejects)
}

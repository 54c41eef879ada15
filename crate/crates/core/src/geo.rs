//! City grid and daily time segmentation.
//!
//! Cells are laid out on a local equirectangular projection anchored at the
//! south-west corner of the bounding box. Rows grow northwards, columns grow
//! eastwards.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed meters per degree of latitude used by the local projection.
pub const METERS_PER_DEGREE: f64 = 111_320.0;

pub const DEFAULT_CELL_SIZE_M: f64 = 400.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::InvalidCoordinates { lat, lon });
        }
        Ok(Self { lat, lon })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellId {
    pub row: u32,
    pub col: u32,
}

impl CellId {
    pub const fn new(row: u32, col: u32) -> Self {
        Self { row, col }
    }

    /// Row-major linear index.
    pub fn linear(self, grid: &GridSpec) -> usize {
        self.row as usize * grid.n_cols() as usize + self.col as usize
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    min_lat: f64,
    min_lon: f64,
    max_lat: f64,
    max_lon: f64,
    cell_size: f64,
    ref_lat: f64,
    n_rows: u32,
    n_cols: u32,
}

impl GridSpec {
    pub fn new(min_lat: f64, min_lon: f64, max_lat: f64, max_lon: f64, cell_size: f64) -> Result<Self> {
        GeoPoint::new(min_lat, min_lon)?;
        GeoPoint::new(max_lat, max_lon)?;
        if min_lat.is_nan() || max_lat.is_nan() || min_lat >= max_lat {
            return Err(Error::InvalidGrid(format!("min_lat {min_lat} must be below max_lat {max_lat}")));
        }
        if min_lon.is_nan() || max_lon.is_nan() || min_lon >= max_lon {
            return Err(Error::InvalidGrid(format!("min_lon {min_lon} must be below max_lon {max_lon}")));
        }
        if !cell_size.is_finite() || cell_size <= 0.0 {
            return Err(Error::InvalidGrid(format!("cell_size must be positive, got {cell_size}")));
        }
        let ref_lat = 0.5 * (min_lat + max_lat);
        let lat_extent = (max_lat - min_lat) * METERS_PER_DEGREE;
        let lon_extent = (max_lon - min_lon) * METERS_PER_DEGREE * ref_lat.to_radians().cos();
        let n_rows = (lat_extent / cell_size).ceil().max(1.0);
        let n_cols = (lon_extent / cell_size).ceil().max(1.0);
        if n_rows > u32::MAX as f64 || n_cols > u32::MAX as f64 {
            return Err(Error::InvalidGrid("grid dimensions overflow".into()));
        }
        Ok(Self {
            min_lat,
            min_lon,
            max_lat,
            max_lon,
            cell_size,
            ref_lat,
            n_rows: n_rows as u32,
            n_cols: n_cols as u32,
        })
    }

    /// Builds a box anchored at `(min_lat, min_lon)` holding exactly
    /// `rows × cols` cells. The far edges sit one meter short of the last
    /// cell boundary so the ceiling in [`GridSpec::new`] is stable.
    pub fn with_dimensions(min_lat: f64, min_lon: f64, rows: u32, cols: u32, cell_size: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidGrid("rows and cols must be positive".into()));
        }
        if cell_size.is_nan() || cell_size <= 1.0 {
            return Err(Error::InvalidGrid(format!("cell_size must exceed 1 m, got {cell_size}")));
        }
        let max_lat = min_lat + (rows as f64 * cell_size - 1.0) / METERS_PER_DEGREE;
        let ref_lat = 0.5 * (min_lat + max_lat);
        let max_lon = min_lon + (cols as f64 * cell_size - 1.0) / (METERS_PER_DEGREE * ref_lat.to_radians().cos());
        let grid = Self::new(min_lat, min_lon, max_lat, max_lon, cell_size)?;
        debug_assert_eq!((grid.n_rows, grid.n_cols), (rows, cols));
        Ok(grid)
    }

    pub fn min_lat(&self) -> f64 {
        self.min_lat
    }
    pub fn min_lon(&self) -> f64 {
        self.min_lon
    }
    pub fn max_lat(&self) -> f64 {
        self.max_lat
    }
    pub fn max_lon(&self) -> f64 {
        self.max_lon
    }
    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }
    pub fn ref_lat(&self) -> f64 {
        self.ref_lat
    }
    pub fn n_rows(&self) -> u32 {
        self.n_rows
    }
    pub fn n_cols(&self) -> u32 {
        self.n_cols
    }
    pub fn n_cells(&self) -> usize {
        self.n_rows as usize * self.n_cols as usize
    }

    fn meters_per_degree_lon(&self) -> f64 {
        METERS_PER_DEGREE * self.ref_lat.to_radians().cos()
    }

    pub fn contains_cell(&self, c: CellId) -> bool {
        c.row < self.n_rows && c.col < self.n_cols
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        (self.min_lat..=self.max_lat).contains(&p.lat) && (self.min_lon..=self.max_lon).contains(&p.lon)
    }

    /// Maps a point onto its cell. Points on the north or east edge clamp into
    /// the last row or column.
    pub fn cell_of(&self, p: GeoPoint) -> Result<CellId> {
        if !self.contains(p) {
            return Err(Error::OutOfBounds(p));
        }
        let dy = (p.lat - self.min_lat) * METERS_PER_DEGREE;
        let dx = (p.lon - self.min_lon) * self.meters_per_degree_lon();
        let row = ((dy / self.cell_size).floor() as u32).min(self.n_rows - 1);
        let col = ((dx / self.cell_size).floor() as u32).min(self.n_cols - 1);
        Ok(CellId { row, col })
    }

    /// Latitude/longitude bounds of the part of `c` that lies inside the box,
    /// as `(south, west, north, east)`.
    pub fn cell_bounds(&self, c: CellId) -> (f64, f64, f64, f64) {
        let dlat = self.cell_size / METERS_PER_DEGREE;
        let dlon = self.cell_size / self.meters_per_degree_lon();
        let south = self.min_lat + c.row as f64 * dlat;
        let west = self.min_lon + c.col as f64 * dlon;
        let north = (south + dlat).min(self.max_lat);
        let east = (west + dlon).min(self.max_lon);
        (south, west, north, east)
    }

    /// Center of the in-box part of `c`.
    pub fn cell_center(&self, c: CellId) -> GeoPoint {
        let (s, w, n, e) = self.cell_bounds(c);
        GeoPoint { lat: 0.5 * (s + n), lon: 0.5 * (w + e) }
    }

    /// Distance in meters between the nominal centers of two cells.
    pub fn center_distance_m(&self, a: CellId, b: CellId) -> f64 {
        let dr = a.row as f64 - b.row as f64;
        let dc = a.col as f64 - b.col as f64;
        (dr * dr + dc * dc).sqrt() * self.cell_size
    }

    /// Moore neighborhood of `c`, clipped to the grid, in row-major order.
    pub fn neighbors8(&self, c: CellId) -> Vec<CellId> {
        let mut out = Vec::with_capacity(8);
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let r = c.row as i64 + dr;
                let col = c.col as i64 + dc;
                if r >= 0 && col >= 0 && r < self.n_rows as i64 && col < self.n_cols as i64 {
                    out.push(CellId::new(r as u32, col as u32));
                }
            }
        }
        out
    }

    /// All cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = CellId> + '_ {
        (0..self.n_rows).flat_map(move |r| (0..self.n_cols).map(move |c| CellId::new(r, c)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TimeInterval {
    Morning,
    Midday,
    Afternoon,
    Night,
    Overnight,
}

impl TimeInterval {
    pub const ALL: [TimeInterval; 5] = [
        TimeInterval::Morning,
        TimeInterval::Midday,
        TimeInterval::Afternoon,
        TimeInterval::Night,
        TimeInterval::Overnight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TimeInterval::Morning => "Morning",
            TimeInterval::Midday => "Midday",
            TimeInterval::Afternoon => "Afternoon",
            TimeInterval::Night => "Night",
            TimeInterval::Overnight => "Overnight",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for TimeInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TimeInterval {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TimeInterval::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidIntervals(format!("unknown interval `{s}`")))
    }
}

/// Start hours of the five daily intervals, in the order of
/// [`TimeInterval::ALL`]. Each interval runs up to the next one's start,
/// wrapping around midnight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalBounds {
    starts: [u32; 5],
}

impl Default for IntervalBounds {
    fn default() -> Self {
        Self { starts: [6, 11, 14, 18, 23] }
    }
}

impl IntervalBounds {
    pub fn new(starts: [u32; 5]) -> Result<Self> {
        if let Some(h) = starts.iter().find(|&&h| h >= 24) {
            return Err(Error::InvalidIntervals(format!("start hour {h} outside 0..24")));
        }
        // The cyclic gaps must all be positive and add up to one day.
        let mut total = 0;
        for i in 0..5 {
            let gap = (starts[(i + 1) % 5] + 24 - starts[i]) % 24;
            if gap == 0 {
                return Err(Error::InvalidIntervals("two intervals share a start hour".into()));
            }
            total += gap;
        }
        if total != 24 {
            return Err(Error::InvalidIntervals(format!(
                "start hours {starts:?} are not in cyclic Morning..Overnight order"
            )));
        }
        Ok(Self { starts })
    }

    pub fn starts(&self) -> [u32; 5] {
        self.starts
    }

    /// Half-open `[start, end)` hour range of `t`; `end` may be smaller than
    /// `start` when the interval wraps past midnight.
    pub fn range(&self, t: TimeInterval) -> (u32, u32) {
        let i = t.index();
        (self.starts[i], self.starts[(i + 1) % 5])
    }

    pub fn interval_of_hour(&self, hour: u32) -> TimeInterval {
        let hour = hour % 24;
        TimeInterval::ALL
            .into_iter()
            .find(|&t| {
                let (start, end) = self.range(t);
                if start < end {
                    (start..end).contains(&hour)
                } else {
                    hour >= start || hour < end
                }
            })
            .expect("interval bounds partition the day")
    }

    pub fn interval_of(&self, ts: &NaiveDateTime) -> TimeInterval {
        self.interval_of_hour(ts.hour())
    }

    /// Hours belonging to `t`, in clock order starting at its start hour.
    pub fn hours(&self, t: TimeInterval) -> Vec<u32> {
        let (start, end) = self.range(t);
        let len = (end + 24 - start) % 24;
        (0..len).map(|k| (start + k) % 24).collect()
    }
}

/// Calendar month, ordered chronologically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MonthId {
    year: i32,
    month: u32,
}

impl MonthId {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidParams(format!("month {month} outside 1..=12")));
        }
        Ok(Self { year, month })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u32 {
        self.month
    }

    pub fn of_date(d: NaiveDate) -> Self {
        Self { year: d.year(), month: d.month() }
    }

    pub fn succ(self) -> Self {
        if self.month == 12 {
            Self { year: self.year + 1, month: 1 }
        } else {
            Self { year: self.year, month: self.month + 1 }
        }
    }

    /// Inclusive month range; empty when `to < from`.
    pub fn range_inclusive(from: MonthId, to: MonthId) -> Vec<MonthId> {
        let mut out = Vec::new();
        let mut m = from;
        while m <= to {
            out.push(m);
            m = m.succ();
        }
        out
    }

    pub fn days(self) -> u32 {
        let first = NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("valid month");
        let next = self.succ();
        let next_first = NaiveDate::from_ymd_opt(next.year, next.month, 1).expect("valid month");
        (next_first - first).num_days() as u32
    }
}

impl fmt::Display for MonthId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for MonthId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParams(format!("expected YYYY-MM, got `{s}`"));
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        let year = y.parse().map_err(|_| bad())?;
        let month = m.parse().map_err(|_| bad())?;
        MonthId::new(year, month).map_err(|_| bad())
    }
}

impl Serialize for MonthId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MonthId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveTime;
    use proptest::prelude::*;

    fn chicago() -> GridSpec {
        GridSpec::new(41.60, -87.95, 42.10, -87.50, 400.0).unwrap()
    }

    #[test]
    fn origin_corner_is_cell_zero() {
        let g = chicago();
        assert_eq!(g.cell_of(GeoPoint { lat: 41.60, lon: -87.95 }).unwrap(), CellId::new(0, 0));
    }

    #[test]
    fn one_cell_north_of_origin() {
        let g = chicago();
        assert!((g.ref_lat() - 41.85).abs() < 1e-12);
        // 0.0036 deg * 111320 m/deg = 400.752 m
        let p = GeoPoint { lat: 41.60 + 0.0036, lon: -87.95 };
        assert_eq!(g.cell_of(p).unwrap().row, 1);
    }

    #[test]
    fn below_box_is_out_of_bounds() {
        let g = chicago();
        let p = GeoPoint { lat: 41.59, lon: -87.9 };
        assert!(matches!(g.cell_of(p), Err(Error::OutOfBounds(_))));
    }

    #[test]
    fn far_corner_clamps_into_last_cell() {
        let g = chicago();
        let c = g.cell_of(GeoPoint { lat: 42.10, lon: -87.50 }).unwrap();
        assert_eq!(c, CellId::new(g.n_rows() - 1, g.n_cols() - 1));
    }

    #[test]
    fn dimensions_follow_ceiling() {
        let g = chicago();
        let lat_m = 0.5 * METERS_PER_DEGREE;
        assert_eq!(g.n_rows(), (lat_m / 400.0).ceil() as u32);
        let g = GridSpec::with_dimensions(41.8, -87.7, 20, 20, 400.0).unwrap();
        assert_eq!((g.n_rows(), g.n_cols()), (20, 20));
    }

    #[test]
    fn rejects_degenerate_boxes() {
        assert!(GridSpec::new(41.0, -87.0, 41.0, -86.0, 400.0).is_err());
        assert!(GridSpec::new(41.0, -87.0, 42.0, -88.0, 400.0).is_err());
        assert!(GridSpec::new(41.0, -87.0, 42.0, -86.0, 0.0).is_err());
        assert!(GridSpec::new(91.0, -87.0, 92.0, -86.0, 400.0).is_err());
    }

    #[test]
    fn default_interval_examples() {
        let b = IntervalBounds::default();
        let at =
            |h, m| NaiveDate::from_ymd_opt(2018, 3, 5).unwrap().and_time(NaiveTime::from_hms_opt(h, m, 0).unwrap());
        assert_eq!(b.interval_of(&at(7, 30)), TimeInterval::Morning);
        assert_eq!(b.interval_of(&at(13, 59)), TimeInterval::Midday);
        assert_eq!(b.interval_of(&at(23, 30)), TimeInterval::Overnight);
        assert_eq!(b.interval_of(&at(0, 0)), TimeInterval::Overnight);
        assert_eq!(b.interval_of(&at(5, 59)), TimeInterval::Overnight);
        assert_eq!(b.interval_of(&at(6, 0)), TimeInterval::Morning);
    }

    #[test]
    fn interval_bounds_validation() {
        assert!(IntervalBounds::new([6, 11, 14, 18, 23]).is_ok());
        assert!(IntervalBounds::new([0, 6, 12, 18, 21]).is_ok());
        assert!(IntervalBounds::new([6, 11, 11, 18, 23]).is_err());
        assert!(IntervalBounds::new([6, 14, 11, 18, 23]).is_err());
        assert!(IntervalBounds::new([6, 11, 14, 18, 24]).is_err());
        let hours: usize = TimeInterval::ALL.iter().map(|&t| IntervalBounds::default().hours(t).len()).sum();
        assert_eq!(hours, 24);
    }

    #[test]
    fn neighbor_counts() {
        let g = GridSpec::with_dimensions(41.8, -87.7, 3, 3, 400.0).unwrap();
        let mid = g.neighbors8(CellId::new(1, 1));
        assert_eq!(mid.len(), 8);
        assert!(!mid.contains(&CellId::new(1, 1)));
        assert!(mid.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(g.neighbors8(CellId::new(0, 0)).len(), 3);
        let one = GridSpec::with_dimensions(41.8, -87.7, 1, 1, 400.0).unwrap();
        assert!(one.neighbors8(CellId::new(0, 0)).is_empty());
    }

    #[test]
    fn month_parsing_and_order() {
        let m: MonthId = "2018-03".parse().unwrap();
        assert_eq!(m.to_string(), "2018-03");
        assert!("2018-3".parse::<MonthId>().is_err());
        assert!("2018-13".parse::<MonthId>().is_err());
        assert!(MonthId::new(2017, 12).unwrap() < MonthId::new(2018, 1).unwrap());
        let all = MonthId::range_inclusive("2018-01".parse().unwrap(), "2018-12".parse().unwrap());
        assert_eq!(all.len(), 12);
        assert_eq!(MonthId::new(2018, 2).unwrap().days(), 28);
    }

    proptest! {
        #[test]
        fn intervals_partition_the_day(secs in 0u32..86_400) {
            let b = IntervalBounds::default();
            let hour = secs / 3600;
            let matches = TimeInterval::ALL.iter().filter(|&&t| b.hours(t).contains(&hour)).count();
            prop_assert_eq!(matches, 1);
            prop_assert!(b.hours(b.interval_of_hour(hour)).contains(&hour));
        }

        #[test]
        fn cell_center_maps_back(row in 0u32..40, col in 0u32..40, size in 50.0f64..900.0) {
            let g = GridSpec::new(40.5, -74.3, 40.95, -73.7, size).unwrap();
            let c = CellId::new(row % g.n_rows(), col % g.n_cols());
            prop_assert_eq!(g.cell_of(g.cell_center(c)).unwrap(), c);
        }

        #[test]
        fn neighbors_are_symmetric(a in 0u32..25, b in 0u32..25) {
            let g = GridSpec::with_dimensions(41.8, -87.7, 5, 5, 400.0).unwrap();
            let ca = CellId::new(a / 5, a % 5);
            let cb = CellId::new(b / 5, b % 5);
            prop_assert_eq!(g.neighbors8(ca).contains(&cb), g.neighbors8(cb).contains(&ca));
        }
    }
}

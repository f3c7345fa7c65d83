//! File formats: incident CSVs, ESRI ASCII grids and result CSVs.
//!
//! Calendar dates are converted to fractional days here; everything past
//! this module works on plain numbers.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Months, NaiveDate, NaiveDateTime};

use crate::domain::{DensitySurface, GridSpec2D, Incident, LandUse, LandUseGrid, TimeWindow};
use crate::error::{Error, Result};
use crate::evaluation::{MethodComparison, MethodTests, Method, PaiCurve, PaiPoint, PredictionGroup};

pub const NODATA: f64 = -9999.0;
const INCIDENT_HEADER: &str = "id,x,y,t";
const PAI_HEADER: &str = "method,group,area_pct,hotspot_cells,hit_rate,pai,feasible";
const COMPARE_HEADER: &str = "area_pct,test,methods,statistic,df1,df2,p_value";

fn display(path: &Path) -> String {
    path.display().to_string()
}

/// Writes `contents` to a temporary file beside `path`, then renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// How the `t` column was read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeEncoding {
    /// Plain day numbers; the epoch is day 0.
    Days,
    /// ISO-8601 dates or datetimes, counted in days from midnight of `epoch`.
    Calendar { epoch: NaiveDate },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectedRow {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncidentTable {
    pub incidents: Vec<Incident>,
    pub encoding: TimeEncoding,
    pub rejected: Vec<RejectedRow>,
}

impl IncidentTable {
    /// Day offset of a calendar date under this table's encoding.
    pub fn day_of(&self, date: NaiveDate) -> Option<f64> {
        match self.encoding {
            TimeEncoding::Calendar { epoch } => Some((date - epoch).num_days() as f64),
            TimeEncoding::Days => None,
        }
    }
}

pub fn parse_datetime(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return d.and_hms_opt(0, 0, 0);
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt);
        }
    }
    DateTime::parse_from_rfc3339(s).ok().map(|dt| dt.naive_utc())
}

fn days_since(epoch: NaiveDate, dt: NaiveDateTime) -> f64 {
    let start = epoch.and_hms_opt(0, 0, 0).expect("midnight exists");
    let d = dt - start;
    match d.num_microseconds() {
        Some(us) => us as f64 / 86_400e6,
        None => d.num_seconds() as f64 / 86_400.0,
    }
}

enum RawTime {
    Days(f64),
    Date(NaiveDateTime),
}

/// Reads `id,x,y,t` rows. The first valid row fixes whether `t` holds day
/// numbers or ISO-8601 dates; rows that do not parse are skipped and listed
/// in `rejected` with their line numbers.
pub fn read_incidents_csv(path: &Path) -> Result<IncidentTable> {
    let name = display(path);
    let text = fs::read_to_string(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|_| Error::MissingHeader {
            path: name.clone(),
            expected: INCIDENT_HEADER.into(),
        })?
        .iter()
        .map(|h| h.trim_start_matches('\u{feff}').to_ascii_lowercase())
        .collect();
    if header != ["id", "x", "y", "t"] {
        return Err(Error::MissingHeader {
            path: name,
            expected: INCIDENT_HEADER.into(),
        });
    }

    let mut rows: Vec<(usize, String, f64, f64, RawTime)> = Vec::new();
    let mut rejected = Vec::new();
    let mut seen = HashSet::new();
    let mut calendar: Option<bool> = None;
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line() as usize);
                rejected.push(RejectedRow {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let reject = |reason: String| RejectedRow { line, reason };
        if record.len() != 4 {
            rejected.push(reject(format!("expected 4 fields, found {}", record.len())));
            continue;
        }
        let id = record[0].to_string();
        if id.is_empty() {
            rejected.push(reject("empty id".into()));
            continue;
        }
        let coord = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite());
        let (Some(x), Some(y)) = (coord(&record[1]), coord(&record[2])) else {
            rejected.push(reject(format!("bad coordinates `{}`, `{}`", &record[1], &record[2])));
            continue;
        };
        let raw_t = &record[3];
        let time = match calendar {
            Some(false) | None if coord(raw_t).is_some() => RawTime::Days(coord(raw_t).unwrap()),
            Some(true) | None => match parse_datetime(raw_t) {
                Some(dt) => RawTime::Date(dt),
                None => {
                    rejected.push(reject(format!("bad time `{raw_t}`")));
                    continue;
                }
            },
            Some(false) => {
                rejected.push(reject(format!("bad time `{raw_t}`, expected a day number")));
                continue;
            }
        };
        calendar.get_or_insert(matches!(time, RawTime::Date(_)));
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId { path: name, id, line });
        }
        rows.push((line, id, x, y, time));
    }
    if rows.is_empty() {
        return Err(Error::NoValidRows { path: name });
    }

    let encoding = match calendar {
        Some(true) => {
            let epoch = rows
                .iter()
                .filter_map(|r| match r.4 {
                    RawTime::Date(dt) => Some(dt.date()),
                    RawTime::Days(_) => None,
                })
                .min()
                .expect("calendar mode has dated rows");
            TimeEncoding::Calendar { epoch }
        }
        _ => TimeEncoding::Days,
    };
    let incidents = rows
        .into_iter()
        .map(|(_, id, x, y, time)| {
            let t = match (time, encoding) {
                (RawTime::Days(t), _) => t,
                (RawTime::Date(dt), TimeEncoding::Calendar { epoch }) => days_since(epoch, dt),
                (RawTime::Date(_), TimeEncoding::Days) => unreachable!("mode fixed by the first row"),
            };
            Incident::new(id, x, y, t)
        })
        .collect();
    Ok(IncidentTable {
        incidents,
        encoding,
        rejected,
    })
}

pub fn write_incidents_csv(path: &Path, incidents: &[Incident]) -> Result<()> {
    let mut out = String::from(INCIDENT_HEADER);
    out.push('\n');
    for inc in incidents {
        let id = if inc.id.contains([',', '"', '\n']) {
            format!("\"{}\"", inc.id.replace('"', "\"\""))
        } else {
            inc.id.clone()
        };
        writeln!(out, "{id},{},{},{}", inc.x, inc.y, inc.t).expect("write to string");
    }
    write_atomic(path, out.as_bytes())
}

/// A raster as stored on disk. `values` are in grid order (row 0 is the
/// southern row); `None` marks NODATA.
#[derive(Debug, Clone, PartialEq)]
pub struct AsciiGrid {
    pub spec: GridSpec2D,
    pub nodata: f64,
    pub values: Vec<Option<f64>>,
}

fn format_value(v: f64) -> String {
    // Integral values (masks, land use, NODATA) stay short; everything else
    // keeps 17 significant digits.
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:.16e}")
    }
}

pub fn format_ascii_grid(grid: &AsciiGrid) -> String {
    let s = &grid.spec;
    let mut out = String::new();
    writeln!(out, "ncols {}", s.n_cols()).unwrap();
    writeln!(out, "nrows {}", s.n_rows()).unwrap();
    writeln!(out, "xllcorner {}", s.x_origin()).unwrap();
    writeln!(out, "yllcorner {}", s.y_origin()).unwrap();
    writeln!(out, "cellsize {}", s.cell_size()).unwrap();
    writeln!(out, "NODATA_value {}", format_value(grid.nodata)).unwrap();
    for j in (0..s.n_rows()).rev() {
        let row: Vec<String> = (0..s.n_cols())
            .map(|i| format_value(grid.values[s.index(i, j)].unwrap_or(grid.nodata)))
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_ascii_grid(path: &Path, grid: &AsciiGrid) -> Result<()> {
    if grid.values.len() != grid.spec.cell_count() {
        return Err(Error::Misaligned(format!(
            "{} values for a {}-cell grid",
            grid.values.len(),
            grid.spec.cell_count()
        )));
    }
    write_atomic(path, format_ascii_grid(grid).as_bytes())
}

pub fn parse_ascii_grid(text: &str, name: &str) -> Result<AsciiGrid> {
    let fail = |line: usize, message: String| Error::Format {
        path: name.to_string(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(n, l)| (n + 1, l)).filter(|(_, l)| !l.trim().is_empty());
    let keys = ["ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"];
    let mut header = [0.0f64; 6];
    let mut last_line = 0;
    for (slot, key) in keys.iter().enumerate() {
        let (n, l) = lines
            .next()
            .ok_or_else(|| fail(last_line + 1, format!("missing `{key}` header line")))?;
        last_line = n;
        let mut parts = l.split_whitespace();
        let k = parts.next().unwrap_or("").to_ascii_lowercase();
        if k != *key {
            return Err(fail(n, format!("expected `{key}`, found `{k}`")));
        }
        let v = parts
            .next()
            .and_then(|v| v.parse::<f64>().ok())
            .filter(|v| v.is_finite())
            .ok_or_else(|| fail(n, format!("bad value for `{key}`")))?;
        if parts.next().is_some() {
            return Err(fail(n, format!("trailing text after `{key}`")));
        }
        header[slot] = v;
    }
    let count = |v: f64, key: &str, line: usize| -> Result<usize> {
        if v >= 1.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(fail(line, format!("`{key}` must be a positive integer, got {v}")))
        }
    };
    let n_cols = count(header[0], "ncols", 1)?;
    let n_rows = count(header[1], "nrows", 2)?;
    let spec = GridSpec2D::new(header[2], header[3], header[4], n_cols, n_rows)
        .map_err(|e| fail(5, e.to_string()))?;
    let nodata = header[5];

    let mut values = vec![None; spec.cell_count()];
    let mut r = 0;
    for (n, l) in lines {
        if r == n_rows {
            return Err(fail(n, format!("more than {n_rows} data rows")));
        }
        let j = n_rows - 1 - r;
        let mut i = 0;
        for tok in l.split_whitespace() {
            if i == n_cols {
                return Err(fail(n, format!("row has more than {n_cols} values")));
            }
            let v: f64 = tok.parse().map_err(|_| fail(n, format!("bad value `{tok}`")))?;
            values[spec.index(i, j)] = if v == nodata { None } else { Some(v) };
            i += 1;
        }
        if i != n_cols {
            return Err(fail(n, format!("row has {i} values, expected {n_cols}")));
        }
        r += 1;
        last_line = n;
    }
    if r != n_rows {
        return Err(fail(last_line + 1, format!("found {r} data rows, expected {n_rows}")));
    }
    Ok(AsciiGrid { spec, nodata, values })
}

pub fn read_ascii_grid(path: &Path) -> Result<AsciiGrid> {
    parse_ascii_grid(&fs::read_to_string(path)?, &display(path))
}

pub fn surface_to_grid(surface: &DensitySurface) -> AsciiGrid {
    AsciiGrid {
        spec: *surface.spec(),
        nodata: NODATA,
        values: surface.values().iter().map(|&v| Some(v)).collect(),
    }
}

pub fn write_surface(path: &Path, surface: &DensitySurface) -> Result<()> {
    write_ascii_grid(path, &surface_to_grid(surface))
}

/// Writes `values` with cells outside the study area as NODATA.
pub fn write_masked(path: &Path, values: &[f64], land_use: &LandUseGrid) -> Result<()> {
    let grid = AsciiGrid {
        spec: *land_use.spec(),
        nodata: NODATA,
        values: values
            .iter()
            .zip(land_use.classes())
            .map(|(&v, c)| c.in_study().then_some(v))
            .collect(),
    };
    write_ascii_grid(path, &grid)
}

/// Reads a density raster; NODATA cells become zero.
pub fn read_surface(path: &Path) -> Result<DensitySurface> {
    let g = read_ascii_grid(path)?;
    DensitySurface::new(g.spec, g.values.iter().map(|v| v.unwrap_or(0.0)).collect())
}

/// Reads a 0/1 raster; NODATA counts as 0.
pub fn read_mask(path: &Path) -> Result<(GridSpec2D, Vec<bool>)> {
    let g = read_ascii_grid(path)?;
    Ok((g.spec, g.values.iter().map(|v| v.is_some_and(|v| v != 0.0)).collect()))
}

pub fn landuse_to_grid(land_use: &LandUseGrid) -> AsciiGrid {
    AsciiGrid {
        spec: *land_use.spec(),
        nodata: NODATA,
        values: land_use
            .classes()
            .iter()
            .map(|c| match c {
                LandUse::Outside => None,
                LandUse::InStudyNonEligible => Some(0.0),
                LandUse::Eligible => Some(1.0),
            })
            .collect(),
    }
}

pub fn write_landuse(path: &Path, land_use: &LandUseGrid) -> Result<()> {
    write_ascii_grid(path, &landuse_to_grid(land_use))
}

/// NODATA is outside the study area, 0 is in-study but not eligible, 1 is eligible.
pub fn landuse_from_grid(grid: &AsciiGrid, name: &str) -> Result<LandUseGrid> {
    let classes = grid
        .values
        .iter()
        .enumerate()
        .map(|(c, v)| match v {
            None => Ok(LandUse::Outside),
            Some(v) if *v == 0.0 => Ok(LandUse::InStudyNonEligible),
            Some(v) if *v == 1.0 => Ok(LandUse::Eligible),
            Some(v) => {
                let (i, j) = grid.spec.cell_of_index(c);
                Err(Error::Format {
                    path: name.to_string(),
                    line: 7 + (grid.spec.n_rows() - 1 - j),
                    message: format!("land-use code {v} at column {} is not NODATA, 0 or 1", i + 1),
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    LandUseGrid::new(grid.spec, classes)
}

pub fn read_landuse(path: &Path) -> Result<LandUseGrid> {
    landuse_from_grid(&read_ascii_grid(path)?, &display(path))
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn pai_row(out: &mut String, method: Method, group: &str, p: &PaiPoint) {
    let (hit, pai) = if p.feasible { (opt(p.hit_rate), opt(p.pai)) } else { Default::default() };
    writeln!(out, "{method},{group},{},{},{hit},{pai},{}", p.area_pct, p.hotspot_cells, p.feasible).unwrap();
}

/// Per-group curves followed by the consolidated (`mean`) curve for each
/// method. Infeasible points leave `hit_rate` and `pai` empty, including
/// consolidated points that only some groups could fill.
pub fn format_pai_csv(per_group: &BTreeMap<Method, Vec<(usize, PaiCurve)>>, consolidated: &BTreeMap<Method, PaiCurve>) -> String {
    let mut out = String::from(PAI_HEADER);
    out.push('\n');
    for (method, groups) in per_group {
        let mut groups: Vec<&(usize, PaiCurve)> = groups.iter().collect();
        groups.sort_by_key(|(g, _)| *g);
        for (g, curve) in groups {
            for p in &curve.points {
                pai_row(&mut out, *method, &g.to_string(), p);
            }
        }
        if let Some(mean) = consolidated.get(method) {
            for p in &mean.points {
                pai_row(&mut out, *method, "mean", p);
            }
        }
    }
    out
}

pub fn write_pai_csv(
    path: &Path,
    per_group: &BTreeMap<Method, Vec<(usize, PaiCurve)>>,
    consolidated: &BTreeMap<Method, PaiCurve>,
) -> Result<()> {
    write_atomic(path, format_pai_csv(per_group, consolidated).as_bytes())
}

/// Curves read back from a PAI CSV: per-group curves and the mean curve per method.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PaiTable {
    pub groups: BTreeMap<Method, BTreeMap<usize, PaiCurve>>,
    pub mean: BTreeMap<Method, PaiCurve>,
}

pub fn read_pai_csv(path: &Path) -> Result<PaiTable> {
    let name = display(path);
    let text = fs::read_to_string(path)?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != PAI_HEADER {
        return Err(Error::MissingHeader {
            path: name,
            expected: PAI_HEADER.into(),
        });
    }
    let mut table = PaiTable::default();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let fail = |message: String| Error::Format {
            path: name.clone(),
            line,
            message,
        };
        let method: Method = record[0].parse().map_err(|e: Error| fail(e.to_string()))?;
        let num = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| fail(format!("bad number `{s}`")))
            }
        };
        let point = PaiPoint {
            area_pct: num(&record[2])?.ok_or_else(|| fail("missing area_pct".into()))?,
            hotspot_cells: record[3].parse().map_err(|_| fail(format!("bad cell count `{}`", &record[3])))?,
            hit_rate: num(&record[4])?,
            pai: num(&record[5])?,
            feasible: record[6].parse().map_err(|_| fail(format!("bad flag `{}`", &record[6])))?,
        };
        let curve = if &record[1] == "mean" {
            table.mean.entry(method).or_default()
        } else {
            let g: usize = record[1].parse().map_err(|_| fail(format!("bad group `{}`", &record[1])))?;
            table.groups.entry(method).or_default().entry(g).or_default()
        };
        curve.points.push(point);
    }
    if table.groups.is_empty() && table.mean.is_empty() {
        return Err(Error::NoValidRows { path: name });
    }
    Ok(table)
}

fn tests_rows(out: &mut String, scale: &str, tests: &MethodTests) {
    let names: Vec<&str> = tests.scores.iter().map(|(m, _)| m.name()).collect();
    if let Some(a) = &tests.anova {
        writeln!(out, "{scale},anova,{},{},{},{},{}", names.join("|"), a.f, a.df_between, a.df_within, a.p).unwrap();
    }
    for t in &tests.pairwise {
        writeln!(out, "{scale},welch_t,{}|{},{},{},,{}", t.a, t.b, t.result.t, t.result.df, t.result.p).unwrap();
    }
}

/// One row per test. Overall tests on per-group mean PAI use `area_pct = all`.
pub fn format_compare_csv(comparison: &MethodComparison) -> String {
    let mut out = String::from(COMPARE_HEADER);
    out.push('\n');
    for s in &comparison.scales {
        tests_rows(&mut out, &s.area_pct.to_string(), &s.tests);
    }
    if let Some(overall) = &comparison.overall {
        tests_rows(&mut out, "all", &overall.tests);
    }
    out
}

pub fn write_compare_csv(path: &Path, comparison: &MethodComparison) -> Result<()> {
    write_atomic(path, format_compare_csv(comparison).as_bytes())
}

/// Weekly-style rolling groups whose training window is the calendar month
/// before each forecast start (e.g. Oct 8 to Nov 8 for a Nov 8 forecast).
pub fn calendar_prediction_groups(
    epoch: NaiveDate,
    data_window: TimeWindow,
    first_forecast: NaiveDate,
    horizon_days: u64,
    group_count: usize,
) -> Result<Vec<PredictionGroup>> {
    if horizon_days == 0 || group_count == 0 {
        return Err(Error::InvalidArgument("horizon and group count must be positive".into()));
    }
    let day = |d: NaiveDate| (d - epoch).num_days() as f64;
    (1..=group_count)
        .map(|g| {
            let start = first_forecast + chrono::Days::new(horizon_days * (g as u64 - 1));
            let end = start + chrono::Days::new(horizon_days);
            let train_start = start
                .checked_sub_months(Months::new(1))
                .ok_or_else(|| Error::InvalidArgument(format!("no month before {start}")))?;
            let training = TimeWindow::new(day(train_start), day(start))?;
            let forecast = TimeWindow::new(day(start), day(end))?;
            if training.start() < data_window.start() || forecast.end() > data_window.end() {
                return Err(Error::GroupsExceedWindow(format!(
                    "group {g} spans {train_start} to {end}"
                )));
            }
            PredictionGroup::new(g, training, forecast)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp_file(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn calendar_times_use_min_date_epoch() {
        let dir = tempfile::tempdir().unwrap();
        let p = tmp_file(&dir, "a.csv", "id,x,y,t\nb,100.0,200.0,2011-01-02\na,100.0,200.0,2011-01-01\n");
        let t = read_incidents_csv(&p).unwrap();
        assert_eq!(
            t.encoding,
            TimeEncoding::Calendar {
                epoch: NaiveDate::from_ymd_opt(2011, 1, 1).unwrap()
            }
        );
        assert_eq!(t.incidents[0].t, 1.0);
        assert_eq!(t.incidents[1].t, 0.0);
        assert_eq!(t.day_of(NaiveDate::from_ymd_opt(2011, 11, 1).unwrap()), Some(304.0));
    }

    #[test]
    fn datetimes_are_fractional_days() {
        let dir = tempfile::tempdir().unwrap();
        let p = tmp_file(&dir, "a.csv", "id,x,y,t\na,1,2,2011-01-01T12:00:00\nb,1,2,2011-01-03 06:00:00\n");
        let t = read_incidents_csv(&p).unwrap();
        assert_eq!(t.incidents[0].t, 0.5);
        assert_eq!(t.incidents[1].t, 2.25);
    }

    #[test]
    fn numeric_times_pass_through() {
        let dir = tempfile::tempdir().unwrap();
        let p = tmp_file(&dir, "a.csv", "id,x,y,t\na,100.0,200.0,3.5\n");
        let t = read_incidents_csv(&p).unwrap();
        assert_eq!(t.encoding, TimeEncoding::Days);
        assert_eq!(t.incidents, vec![Incident::new("a", 100.0, 200.0, 3.5)]);
    }

    #[test]
    fn bad_rows_are_rejected_with_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = tmp_file(
            &dir,
            "a.csv",
            "id,x,y,t\na,1,2,3\nb,oops,2,3\nc,1,2\nd,1,2,2011-01-01\ne,1,2,4\n",
        );
        let t = read_incidents_csv(&p).unwrap();
        assert_eq!(t.incidents.len(), 2);
        let lines: Vec<usize> = t.rejected.iter().map(|r| r.line).collect();
        assert_eq!(lines, vec![3, 4, 5]);
    }

    #[test]
    fn error_categories() {
        let dir = tempfile::tempdir().unwrap();
        let dup = tmp_file(&dir, "d.csv", "id,x,y,t\na,1,2,3\na,1,2,4\n");
        match read_incidents_csv(&dup) {
            Err(Error::DuplicateId { id, line, .. }) => assert_eq!((id.as_str(), line), ("a", 3)),
            other => panic!("{other:?}"),
        }
        let hdr = tmp_file(&dir, "h.csv", "name,x,y,t\na,1,2,3\n");
        assert!(matches!(read_incidents_csv(&hdr), Err(Error::MissingHeader { .. })));
        let empty = tmp_file(&dir, "e.csv", "id,x,y,t\na,x,y,z\n");
        assert!(matches!(read_incidents_csv(&empty), Err(Error::NoValidRows { .. })));
    }

    #[test]
    fn incident_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("i.csv");
        let inc = vec![
            Incident::new("a", 0.1 + 0.2, 1e-7, 3.0),
            Incident::new("b,c", 123456.789, -5.5, 0.0),
        ];
        write_incidents_csv(&p, &inc).unwrap();
        assert_eq!(read_incidents_csv(&p).unwrap().incidents, inc);
    }

    #[test]
    fn landuse_with_one_nodata_cell() {
        let text = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 10\nNODATA_value -9999\n-9999 1\n0 1\n";
        let g = parse_ascii_grid(text, "lu").unwrap();
        let lu = landuse_from_grid(&g, "lu").unwrap();
        let outside = lu.classes().iter().filter(|c| **c == LandUse::Outside).count();
        assert_eq!(outside, 1);
        // The first data row is the northern one.
        assert_eq!(lu.class_at(0, 1), LandUse::Outside);
        assert_eq!(lu.class_at(0, 0), LandUse::InStudyNonEligible);
        assert_eq!(format_ascii_grid(&landuse_to_grid(&lu)), text);
    }

    #[test]
    fn row_count_mismatch_names_line() {
        let text = "ncols 2\nnrows 3\nxllcorner 0\nyllcorner 0\ncellsize 10\nNODATA_value -9999\n1 1\n0 1\n";
        match parse_ascii_grid(text, "g") {
            Err(Error::Format { line, .. }) => assert_eq!(line, 9),
            other => panic!("{other:?}"),
        }
        let text = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 10\nNODATA_value -9999\n1 1\n0 1 1\n";
        match parse_ascii_grid(text, "g") {
            Err(Error::Format { line, .. }) => assert_eq!(line, 8),
            other => panic!("{other:?}"),
        }
        let text = "ncols 2\nrows 2\n";
        assert!(matches!(parse_ascii_grid(text, "g"), Err(Error::Format { line: 2, .. })));
    }

    #[test]
    fn density_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let spec = GridSpec2D::new(100.25, -3.5, 0.1, 3, 2).unwrap();
        let s = DensitySurface::new(spec, vec![0.1 + 0.2, 1e-300, 0.0, 5.0, f64::MAX, 1.0 / 3.0]).unwrap();
        let p = dir.path().join("s.asc");
        write_surface(&p, &s).unwrap();
        assert_eq!(read_surface(&p).unwrap(), s);
    }

    fn point(a: f64, hr: Option<f64>) -> PaiPoint {
        PaiPoint {
            area_pct: a,
            hotspot_cells: 2,
            hit_rate: hr,
            pai: hr.map(|h| h / (a / 100.0)),
            feasible: hr.is_some(),
        }
    }

    #[test]
    fn pai_csv_layout_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let curve = PaiCurve {
            points: vec![point(0.1, Some(0.01)), point(0.2, Some(0.02)), point(0.3, None)],
        };
        let mut per_group = BTreeMap::new();
        per_group.insert(Method::Stkde, vec![(1, curve.clone())]);
        let mut mean = BTreeMap::new();
        mean.insert(Method::Stkde, curve.clone());
        let text = format_pai_csv(&per_group, &mean);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[0], PAI_HEADER);
        assert_eq!(lines[3], "STKDE,1,0.3,2,,,false");
        assert!(lines[4].starts_with("STKDE,mean,0.1,"));
        let p = dir.path().join("pai.csv");
        write_pai_csv(&p, &per_group, &mean).unwrap();
        let back = read_pai_csv(&p).unwrap();
        assert_eq!(back.groups[&Method::Stkde][&1], curve);
        assert_eq!(back.mean[&Method::Stkde], curve);
    }

    #[test]
    fn calendar_groups_follow_months() {
        let epoch = NaiveDate::from_ymd_opt(2011, 1, 1).unwrap();
        let window = TimeWindow::new(0.0, 365.0).unwrap();
        let first = NaiveDate::from_ymd_opt(2011, 11, 1).unwrap();
        let groups = calendar_prediction_groups(epoch, window, first, 7, 8).unwrap();
        let starts: Vec<NaiveDate> = groups
            .iter()
            .map(|g| epoch + chrono::Days::new(g.forecast.start() as u64))
            .collect();
        let expected: Vec<NaiveDate> = [(11, 1), (11, 8), (11, 15), (11, 22), (11, 29), (12, 6), (12, 13), (12, 20)]
            .iter()
            .map(|&(m, d)| NaiveDate::from_ymd_opt(2011, m, d).unwrap())
            .collect();
        assert_eq!(starts, expected);
        // Nov 1 trains on Oct 1 .. Nov 1 (31 days); Dec 6 on Nov 6 .. Dec 6 (30 days).
        assert_eq!(groups[0].training.length(), 31.0);
        assert_eq!(groups[5].training.length(), 30.0);
        assert!(calendar_prediction_groups(epoch, window, first, 7, 9).is_err());
    }
}

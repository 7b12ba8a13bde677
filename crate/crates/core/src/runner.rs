//! Convergence records, CSV output, repeated timing runs and rate fitting.

use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::adaptivity::{adaptive_loop_with, AdaptiveParams, AdaptivityError};
use crate::benchmarks::Problem;

pub const CSV_NAME: &str = "convergence.csv";

pub const HEADER: [&str; 17] = [
    "level",
    "case",
    "n_triangles",
    "ndof",
    "eta_nat",
    "eta_sep",
    "eta_col",
    "mu",
    "osc",
    "ls_value",
    "err_grad",
    "err_flux_l2",
    "err_flux_div",
    "t_solve",
    "t_estimate",
    "t_mark",
    "t_refine",
];

const TIMING: [&str; 4] = ["t_solve", "t_estimate", "t_mark", "t_refine"];

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Adaptivity(#[from] AdaptivityError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("column `{0}` not found")]
    MissingColumn(String),
    #[error("cannot parse `{value}` in column `{column}`")]
    Parse { column: String, value: String },
    #[error("rate fit needs at least 4 rows in the ndof window, found {0}")]
    Window(usize),
    #[error("repeated runs disagree at level {0}")]
    Nondeterministic(usize),
}

/// Min and max of each timing column over repeated runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingSpread {
    pub min: [f64; 4],
    pub max: [f64; 4],
}

/// One level of an adaptive run. Estimators are norms, `ls_value` is the squared functional.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub level: usize,
    pub case: String,
    pub n_triangles: usize,
    pub ndof: usize,
    pub eta_nat: f64,
    pub eta_sep: f64,
    pub eta_col: f64,
    pub mu: f64,
    pub osc: f64,
    pub ls_value: f64,
    pub err_grad: Option<f64>,
    pub err_flux_l2: Option<f64>,
    pub err_flux_div: Option<f64>,
    pub t_solve: f64,
    pub t_estimate: f64,
    pub t_mark: f64,
    pub t_refine: f64,
    pub timing_spread: Option<TimingSpread>,
}

impl RunRecord {
    pub fn timings(&self) -> [f64; 4] {
        [self.t_solve, self.t_estimate, self.t_mark, self.t_refine]
    }

    fn set_timings(&mut self, t: [f64; 4]) {
        [self.t_solve, self.t_estimate, self.t_mark, self.t_refine] = t;
    }

    /// Same level data up to timings.
    pub fn same_results(&self, other: &RunRecord) -> bool {
        let strip = |r: &RunRecord| RunRecord { timing_spread: None, ..r.clone() }.with_timings([0.0; 4]);
        strip(self) == strip(other)
    }

    fn with_timings(mut self, t: [f64; 4]) -> Self {
        self.set_timings(t);
        self
    }
}

fn sci(x: f64) -> String {
    format!("{x:.8e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(sci).unwrap_or_default()
}

/// Writes the CSV. Timing spread columns are appended when any record carries them.
pub fn write_csv(records: &[RunRecord], w: impl Write) -> Result<(), RunnerError> {
    let spread = records.iter().any(|r| r.timing_spread.is_some());
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = HEADER.iter().map(|s| s.to_string()).collect();
    if spread {
        for suffix in ["min", "max"] {
            header.extend(TIMING.iter().map(|t| format!("{t}_{suffix}")));
        }
    }
    out.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.level.to_string(),
            r.case.clone(),
            r.n_triangles.to_string(),
            r.ndof.to_string(),
            sci(r.eta_nat),
            sci(r.eta_sep),
            sci(r.eta_col),
            sci(r.mu),
            sci(r.osc),
            sci(r.ls_value),
            opt(r.err_grad),
            opt(r.err_flux_l2),
            opt(r.err_flux_div),
        ];
        row.extend(r.timings().map(sci));
        if spread {
            let s = r.timing_spread.unwrap_or(TimingSpread { min: r.timings(), max: r.timings() });
            row.extend(s.min.map(sci));
            row.extend(s.max.map(sci));
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads the records back; extra columns are ignored.
pub fn read_csv(r: impl Read) -> Result<Vec<RunRecord>, RunnerError> {
    let table = Table::read(r)?;
    let mut records = Vec::with_capacity(table.rows.len());
    for row in 0..table.rows.len() {
        let num = |c: &str| table.number(row, c);
        let int = |c: &str| -> Result<usize, RunnerError> {
            let v = table.cell(row, c)?;
            v.parse().map_err(|_| RunnerError::Parse { column: c.into(), value: v.into() })
        };
        let optional = |c: &str| -> Result<Option<f64>, RunnerError> {
            if table.cell(row, c)?.is_empty() {
                Ok(None)
            } else {
                num(c).map(Some)
            }
        };
        records.push(RunRecord {
            level: int("level")?,
            case: table.cell(row, "case")?.to_string(),
            n_triangles: int("n_triangles")?,
            ndof: int("ndof")?,
            eta_nat: num("eta_nat")?,
            eta_sep: num("eta_sep")?,
            eta_col: num("eta_col")?,
            mu: num("mu")?,
            osc: num("osc")?,
            ls_value: num("ls_value")?,
            err_grad: optional("err_grad")?,
            err_flux_l2: optional("err_flux_l2")?,
            err_flux_div: optional("err_flux_div")?,
            t_solve: num("t_solve")?,
            t_estimate: num("t_estimate")?,
            t_mark: num("t_mark")?,
            t_refine: num("t_refine")?,
            timing_spread: None,
        });
    }
    Ok(records)
}

struct Table {
    header: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn read(r: impl Read) -> Result<Self, RunnerError> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers()?.iter().map(str::to_string).collect();
        let rows = rd.records().collect::<Result<_, _>>()?;
        Ok(Table { header, rows })
    }

    fn cell(&self, row: usize, column: &str) -> Result<&str, RunnerError> {
        let i = self
            .header
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| RunnerError::MissingColumn(column.to_string()))?;
        Ok(self.rows[row].get(i).unwrap_or(""))
    }

    fn number(&self, row: usize, column: &str) -> Result<f64, RunnerError> {
        let v = self.cell(row, column)?;
        v.trim().parse().map_err(|_| RunnerError::Parse { column: column.into(), value: v.into() })
    }
}

/// Least-squares slope of `-log(value)` against `log(ndof)` over rows with `lo <= ndof <= hi`.
///
/// Rows with a non-positive value are skipped since they have no logarithm.
pub fn fit_rate(ndof: &[f64], values: &[f64], window: (f64, f64)) -> Result<f64, RunnerError> {
    let pts: Vec<(f64, f64)> = ndof
        .iter()
        .zip(values)
        .filter(|&(&n, &v)| n >= window.0 && n <= window.1 && v > 0.0 && v.is_finite())
        .map(|(&n, &v)| (n.ln(), v.ln()))
        .collect();
    if pts.len() < 4 {
        return Err(RunnerError::Window(pts.len()));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(RunnerError::Window(1));
    }
    Ok(-sxy / sxx)
}

/// [`fit_rate`] on a column of a convergence CSV.
pub fn fit_rate_csv(r: impl Read, column: &str, window: (f64, f64)) -> Result<f64, RunnerError> {
    let table = Table::read(r)?;
    let mut n = Vec::new();
    let mut v = Vec::new();
    for row in 0..table.rows.len() {
        if table.cell(row, column)?.is_empty() {
            continue;
        }
        n.push(table.number(row, "ndof")?);
        v.push(table.number(row, column)?);
    }
    fit_rate(&n, &v, window)
}

/// Output options of [`run`].
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub dump_meshes: bool,
    pub repeat: usize,
}

pub fn mesh_dump_path(dir: &Path, level: usize) -> PathBuf {
    dir.join(format!("mesh_L{level}.txt"))
}

/// Runs the adaptive loop `repeat` times, averaging timings, and writes the outputs.
///
/// Mesh dumps are written during the first run only.
pub fn run(problem: &Problem, params: &AdaptiveParams, options: &RunOptions) -> Result<Vec<RunRecord>, RunnerError> {
    if let Some(dir) = &options.out_dir {
        fs::create_dir_all(dir)?;
    }
    let repeat = options.repeat.max(1);
    let mut runs: Vec<Vec<RunRecord>> = Vec::with_capacity(repeat);
    for k in 0..repeat {
        let dump_dir = options.out_dir.as_deref().filter(|_| options.dump_meshes && k == 0);
        let records = adaptive_loop_with(problem, params, |state| match dump_dir {
            Some(dir) => {
                let mut w = BufWriter::new(File::create(mesh_dump_path(dir, state.record.level))?);
                state.mesh.write_dump(&mut w)?;
                w.flush()
            }
            None => Ok(()),
        })?;
        runs.push(records);
    }
    let records = if repeat == 1 { runs.pop().unwrap_or_default() } else { aggregate(&runs)? };
    if let Some(dir) = &options.out_dir {
        let mut w = BufWriter::new(File::create(dir.join(CSV_NAME))?);
        write_csv(&records, &mut w)?;
        w.flush()?;
    }
    Ok(records)
}

/// Mean timings with min/max spread; levels beyond the shortest run are dropped.
fn aggregate(runs: &[Vec<RunRecord>]) -> Result<Vec<RunRecord>, RunnerError> {
    let levels = runs.iter().map(Vec::len).min().unwrap_or(0);
    let mut out = Vec::with_capacity(levels);
    for l in 0..levels {
        let first = &runs[0][l];
        let mut sum = [0.0; 4];
        let mut min = [f64::INFINITY; 4];
        let mut max = [f64::NEG_INFINITY; 4];
        for run in runs {
            if !run[l].same_results(first) {
                return Err(RunnerError::Nondeterministic(l));
            }
            for (i, t) in run[l].timings().into_iter().enumerate() {
                sum[i] += t;
                min[i] = min[i].min(t);
                max[i] = max[i].max(t);
            }
        }
        let mut r = first.clone();
        r.set_timings(sum.map(|s| s / runs.len() as f64));
        r.timing_spread = Some(TimingSpread { min, max });
        out.push(r);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptivity::Algorithm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample() -> RunRecord {
        RunRecord {
            level: 3,
            case: "B".into(),
            n_triangles: 20,
            ndof: 33,
            eta_nat: 0.125,
            eta_sep: 1.0 / 3.0,
            eta_col: 2.5e-7,
            mu: 0.0,
            osc: 1e-300,
            ls_value: 0.015625,
            err_grad: None,
            err_flux_l2: Some(0.1),
            err_flux_div: None,
            t_solve: 1e-3,
            t_estimate: 2e-4,
            t_mark: 0.0,
            t_refine: 5e-5,
            timing_spread: None,
        }
    }

    #[test]
    fn csv_header_and_format() {
        let mut buf = Vec::new();
        write_csv(&[sample()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), HEADER.join(","));
        assert_eq!(
            lines.next().unwrap(),
            "3,B,20,33,1.25000000e-1,3.33333333e-1,2.50000000e-7,0.00000000e0,1.00000000e-300,1.56250000e-2,,1.00000000e-1,,1.00000000e-3,2.00000000e-4,0.00000000e0,5.00000000e-5"
        );
    }

    #[test]
    fn csv_round_trip() {
        let mut buf = Vec::new();
        write_csv(&[sample()], &mut buf).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        let mut expected = sample();
        expected.eta_sep = 3.33333333e-1;
        assert_eq!(back, vec![expected]);
    }

    #[test]
    fn spread_columns_follow_the_header() {
        let mut r = sample();
        r.timing_spread = Some(TimingSpread { min: [0.0; 4], max: [1.0; 4] });
        let mut buf = Vec::new();
        write_csv(&[r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.starts_with(&HEADER.join(",")));
        assert!(header.ends_with("t_solve_max,t_estimate_max,t_mark_max,t_refine_max"));
        assert_eq!(read_csv(text.as_bytes()).unwrap().len(), 1);
    }

    #[test]
    fn exact_power_laws() {
        let n: Vec<f64> = (0..10).map(|k| 100.0 * 2f64.powi(k)).collect();
        for rate in [0.5, 1.0 / 3.0, 1.0] {
            let v: Vec<f64> = n.iter().map(|x| 3.7 * x.powf(-rate)).collect();
            assert!((fit_rate(&n, &v, (0.0, f64::INFINITY)).unwrap() - rate).abs() < 1e-12);
        }
    }

    #[test]
    fn noisy_power_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n: Vec<f64> = (0..12).map(|k| 1e3 * 1.5f64.powi(k)).collect();
            let v: Vec<f64> = n.iter().map(|x| x.powf(-0.5) * (1.0 + rng.gen_range(-0.05..0.05))).collect();
            assert!((fit_rate(&n, &v, (1e3, 1e6)).unwrap() - 0.5).abs() < 0.05);
        }
    }

    #[test]
    fn window_needs_four_rows() {
        let n = [1.0, 10.0, 100.0, 1000.0, 1e4];
        let v = [1.0, 0.5, 0.25, 0.125, 0.0625];
        assert!(matches!(fit_rate(&n, &v, (5.0, 2e3)), Err(RunnerError::Window(3))));
        assert!(fit_rate(&n, &v, (1.0, 1e4)).is_ok());
    }

    #[test]
    fn run_writes_csv_and_dumps() {
        let dir = tempfile::tempdir().unwrap();
        let params = AdaptiveParams { max_ndof: 300, ..AdaptiveParams::new(Algorithm::Calsfem) };
        let options = RunOptions { out_dir: Some(dir.path().into()), dump_meshes: true, repeat: 2 };
        let records = run(&Problem::lshape(), &params, &options).unwrap();
        let back = read_csv(File::open(dir.path().join(CSV_NAME)).unwrap()).unwrap();
        assert_eq!(back.len(), records.len());
        for (l, r) in records.iter().enumerate() {
            let dump = crate::mesh::read_mesh_dump(io::BufReader::new(File::open(mesh_dump_path(dir.path(), l)).unwrap())).unwrap();
            assert_eq!(dump.triangles.len(), r.n_triangles);
            let s = r.timing_spread.unwrap();
            for i in 0..4 {
                assert!(s.min[i] <= r.timings()[i] + 1e-15 && r.timings()[i] <= s.max[i] + 1e-15);
            }
        }
        assert!(records.windows(2).all(|w| w[1].ndof > w[0].ndof));
    }
}

//! CSV formats for curves, trajectories and reports.
//!
//! Every file starts with one `key=value,...` line naming the curve kind and
//! the manifold, followed by a header row. Numbers are written with 17
//! significant digits so that a write/read round trip is bit-exact. All
//! writes go through a temporary file in the target directory and a rename.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::curve::{PiecewiseConstantCurve, SampledCurve};
use crate::error::{Error, Result};
use crate::flow::{
    face_z_field, pc_velocity, reconstruct_z_pc, Curve, Diagnostics, FlowTrajectory, Frame, SolverKind,
};
use crate::manifold::{ManifoldPoint, ManifoldSpec};
use crate::verify::CheckReport;

/// Shortest decimal form is not guaranteed to be 17 digits; this one is.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("not a number: {s:?}")))
}

/// Replaces `path` with `bytes` in one rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::from(e.error))?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().flexible(true).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

fn coord_header(first: &[&str], n: usize) -> Vec<String> {
    first.iter().map(|s| s.to_string()).chain((0..n).map(|i| format!("c{i}"))).collect()
}

/// `key=value` pairs of the leading line.
struct Meta(Vec<(String, String)>);

impl Meta {
    fn parse(rec: &csv::StringRecord) -> Result<Self> {
        let mut out = Vec::new();
        for f in rec {
            let (k, v) = f
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value in the first line, got {f:?}")))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(Meta(out))
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::Parse(format!("missing {key}= in the first line")))
    }
}

fn records(text: &str) -> Result<Vec<csv::StringRecord>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
        .records()
        .map(|r| r.map_err(csv_err))
        .collect()
}

fn kind_name(c: &Curve) -> &'static str {
    match c {
        Curve::Pc(_) => "pc",
        Curve::Sampled(_) => "sampled",
    }
}

/// Rows `(x, coords)`: right plateau ends for PC curves, nodes otherwise.
fn curve_rows(c: &Curve) -> Vec<(f64, &[f64])> {
    match c {
        Curve::Pc(p) => {
            let b = p.breakpoints();
            p.values()
                .iter()
                .enumerate()
                .map(|(i, v)| (if i < b.len() { b[i] } else { 1.0 }, v.coords()))
                .collect()
        }
        Curve::Sampled(s) => (0..s.grid_n()).map(|i| (s.x(i), s.value(i))).collect(),
    }
}

fn curve_from_rows(m: ManifoldSpec, kind: &str, xs: &[f64], coords: Vec<f64>) -> Result<Curve> {
    let n = m.dim();
    match kind {
        "pc" => {
            if xs.last() != Some(&1.0) {
                return Err(Error::Parse("the last plateau of a pc curve must end at x = 1".into()));
            }
            let values = coords
                .chunks(n)
                .map(|c| ManifoldPoint::new(m, c.to_vec()))
                .collect::<Result<Vec<_>>>()?;
            Ok(Curve::Pc(PiecewiseConstantCurve::new(m, xs[..xs.len() - 1].to_vec(), values)?))
        }
        "sampled" => {
            let s = SampledCurve::from_flat(m, coords)?;
            for (i, &x) in xs.iter().enumerate() {
                if (x - s.x(i)).abs() > 1e-12 {
                    return Err(Error::Parse(format!("row {i}: x = {x} is off the uniform grid")));
                }
            }
            Ok(Curve::Sampled(s))
        }
        k => Err(Error::Parse(format!("unknown curve kind {k:?}"))),
    }
}

fn parse_row(rec: &csv::StringRecord, lead: usize, n: usize, line: usize) -> Result<Vec<f64>> {
    if rec.len() != lead + n {
        return Err(Error::Parse(format!(
            "line {line}: expected {} columns, found {}",
            lead + n,
            rec.len()
        )));
    }
    rec.iter().map(parse_f64).collect()
}

pub fn curve_to_string(c: &Curve) -> Result<String> {
    let m = c.manifold();
    let mut w = writer();
    w.write_record([format!("kind={}", kind_name(c)), format!("manifold={m}")]).map_err(csv_err)?;
    let first = if matches!(c, Curve::Pc(_)) { "x_right_end" } else { "x" };
    w.write_record(coord_header(&[first], m.dim())).map_err(csv_err)?;
    for (x, v) in curve_rows(c) {
        w.write_record(std::iter::once(fmt_f64(x)).chain(v.iter().map(|&y| fmt_f64(y)))).map_err(csv_err)?;
    }
    finish(w)
}

pub fn curve_from_str(text: &str) -> Result<Curve> {
    let recs = records(text)?;
    if recs.len() < 3 {
        return Err(Error::Parse("curve file needs a kind line, a header and data rows".into()));
    }
    let meta = Meta::parse(&recs[0])?;
    let kind = meta.require("kind")?;
    let m: ManifoldSpec = meta.require("manifold")?.parse()?;
    let n = m.dim();
    if recs[1].len() != n + 1 {
        return Err(Error::Parse(format!("header has {} columns, {m} needs {}", recs[1].len(), n + 1)));
    }
    let mut xs = Vec::new();
    let mut coords = Vec::new();
    for (i, r) in recs[2..].iter().enumerate() {
        let row = parse_row(r, 1, n, i + 3)?;
        xs.push(row[0]);
        coords.extend_from_slice(&row[1..]);
    }
    curve_from_rows(m, kind, &xs, coords)
}

pub fn write_curve(path: &Path, c: &Curve) -> Result<()> {
    atomic_write(path, curve_to_string(c)?.as_bytes())
}

pub fn read_curve(path: &Path) -> Result<Curve> {
    curve_from_str(&fs::read_to_string(path)?)
}

pub fn solver_name(s: SolverKind) -> &'static str {
    match s {
        SolverKind::Regularized => "regularized",
        SolverKind::ExactPc => "exact_pc",
        SolverKind::Geodesic => "geodesic",
    }
}

fn parse_solver(s: &str) -> Result<SolverKind> {
    match s {
        "regularized" => Ok(SolverKind::Regularized),
        "exact_pc" => Ok(SolverKind::ExactPc),
        "geodesic" => Ok(SolverKind::Geodesic),
        _ => Err(Error::Parse(format!("unknown solver {s:?}"))),
    }
}

/// Trajectory rows `t,x,c0..` for every snapshot.
pub fn trajectory_to_string(tr: &FlowTrajectory) -> Result<String> {
    let m = tr.manifold;
    let kind = tr.frames.first().map(|f| kind_name(&f.curve)).unwrap_or("pc");
    let mut w = writer();
    let mut meta = vec![
        format!("kind={kind}"),
        format!("manifold={m}"),
        format!("solver={}", solver_name(tr.solver)),
        format!("dt={}", fmt_f64(tr.dt)),
    ];
    if let Some(e) = tr.epsilon {
        meta.push(format!("epsilon={}", fmt_f64(e)));
    }
    w.write_record(meta).map_err(csv_err)?;
    w.write_record(coord_header(&["t", "x"], m.dim())).map_err(csv_err)?;
    for f in &tr.frames {
        if kind_name(&f.curve) != kind {
            return Err(Error::IncompatibleSnapshots("mixed curve kinds in one trajectory".into()));
        }
        for (x, v) in curve_rows(&f.curve) {
            w.write_record([fmt_f64(f.t), fmt_f64(x)].into_iter().chain(v.iter().map(|&y| fmt_f64(y))))
                .map_err(csv_err)?;
        }
    }
    finish(w)
}

pub fn diagnostics_to_string(tr: &FlowTrajectory) -> Result<String> {
    let mut w = writer();
    w.write_record(["t", "tv", "dissipation", "max_jump", "stopped"]).map_err(csv_err)?;
    for d in tr.diagnostics() {
        w.write_record([
            fmt_f64(d.t),
            fmt_f64(d.tv),
            fmt_f64(d.dissipation),
            fmt_f64(d.max_jump),
            (d.stopped as u8).to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

pub fn diagnostics_from_str(text: &str) -> Result<Vec<Diagnostics>> {
    let recs = records(text)?;
    let Some(head) = recs.first() else {
        return Err(Error::Parse("empty diagnostics file".into()));
    };
    if head.iter().collect::<Vec<_>>() != ["t", "tv", "dissipation", "max_jump", "stopped"] {
        return Err(Error::Parse("diagnostics header must be t,tv,dissipation,max_jump,stopped".into()));
    }
    recs[1..]
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if r.len() != 5 {
                return Err(Error::Parse(format!("diagnostics line {}: expected 5 columns", i + 2)));
            }
            let stopped = match &r[4] {
                "0" | "false" => false,
                "1" | "true" => true,
                s => return Err(Error::Parse(format!("bad stopped flag {s:?}"))),
            };
            Ok(Diagnostics {
                t: parse_f64(&r[0])?,
                tv: parse_f64(&r[1])?,
                dissipation: parse_f64(&r[2])?,
                max_jump: parse_f64(&r[3])?,
                stopped,
            })
        })
        .collect()
}

/// Rebuilds a trajectory. z-fields and velocities are not stored; they are
/// recomputed for piecewise-constant frames, and sampled frames get a z-field
/// when the file records ε.
pub fn trajectory_from_str(traj: &str, diag: &str) -> Result<FlowTrajectory> {
    let recs = records(traj)?;
    if recs.len() < 2 {
        return Err(Error::Parse("trajectory file needs a kind line and a header".into()));
    }
    let meta = Meta::parse(&recs[0])?;
    let kind = meta.require("kind")?.to_string();
    let m: ManifoldSpec = meta.require("manifold")?.parse()?;
    let solver = parse_solver(meta.require("solver")?)?;
    let dt = parse_f64(meta.require("dt")?)?;
    let epsilon = meta.get("epsilon").map(parse_f64).transpose()?;
    let n = m.dim();
    if recs[1].len() != n + 2 {
        return Err(Error::Parse(format!("header has {} columns, {m} needs {}", recs[1].len(), n + 2)));
    }
    let diags = diagnostics_from_str(diag)?;

    let mut groups: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::new();
    for (i, r) in recs[2..].iter().enumerate() {
        let row = parse_row(r, 2, n, i + 3)?;
        match groups.last_mut() {
            Some(g) if g.0 == row[0] => {
                g.1.push(row[1]);
                g.2.extend_from_slice(&row[2..]);
            }
            _ => groups.push((row[0], vec![row[1]], row[2..].to_vec())),
        }
    }
    if groups.len() != diags.len() {
        return Err(Error::IncompatibleSnapshots(format!(
            "{} snapshots but {} diagnostics rows",
            groups.len(),
            diags.len()
        )));
    }
    let mut frames = Vec::with_capacity(groups.len());
    for ((t, xs, coords), d) in groups.into_iter().zip(diags) {
        if d.t != t {
            return Err(Error::IncompatibleSnapshots(format!("snapshot at t={t} but diagnostics at t={}", d.t)));
        }
        let curve = curve_from_rows(m, &kind, &xs, coords)?;
        let (z, velocity) = match &curve {
            Curve::Pc(c) => {
                let flat: Vec<f64> = c.values().iter().flat_map(|v| v.coords().iter().copied()).collect();
                let v = if c.is_constant() {
                    vec![0.0; flat.len()]
                } else {
                    pc_velocity(m, &flat, &c.plateau_lengths())?.0
                };
                (Some(reconstruct_z_pc(c)?), Some(v))
            }
            Curve::Sampled(s) => (epsilon.map(|e| face_z_field(s, e)).transpose()?, None),
        };
        frames.push(Frame { t, curve, z, velocity, diag: d });
    }
    Ok(FlowTrajectory { manifold: m, solver, dt, epsilon, frames })
}

pub fn write_trajectory(traj_path: &Path, diag_path: &Path, tr: &FlowTrajectory) -> Result<()> {
    atomic_write(traj_path, trajectory_to_string(tr)?.as_bytes())?;
    atomic_write(diag_path, diagnostics_to_string(tr)?.as_bytes())
}

pub fn read_trajectory(traj_path: &Path, diag_path: &Path) -> Result<FlowTrajectory> {
    trajectory_from_str(&fs::read_to_string(traj_path)?, &fs::read_to_string(diag_path)?)
}

pub fn reports_to_string(reports: &[CheckReport]) -> Result<String> {
    let mut w = writer();
    w.write_record(["check", "pass", "worst", "at_t", "at_x", "tol"]).map_err(csv_err)?;
    for r in reports {
        w.write_record([
            r.check.clone(),
            r.pass.to_string(),
            fmt_f64(r.worst_violation),
            fmt_f64(r.at_t),
            r.at_x.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.tolerance),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// A plain numeric table with a header row.
pub fn table_to_string(header: &[&str], rows: &[Vec<f64>]) -> Result<String> {
    let mut w = writer();
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r.iter().map(|&x| fmt_f64(x))).map_err(csv_err)?;
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{run_exact_pc, run_regularized, FlowConfig};
    use proptest::prelude::*;

    const S3: ManifoldSpec = ManifoldSpec::Sphere(3);

    fn e(i: usize) -> ManifoldPoint {
        let mut c = vec![0.0; 3];
        c[i] = 1.0;
        ManifoldPoint::new(S3, c).unwrap()
    }

    fn three_plateaus() -> PiecewiseConstantCurve {
        PiecewiseConstantCurve::new(S3, vec![1.0 / 3.0, 5.0 / 7.0], vec![e(0), e(1), e(2)]).unwrap()
    }

    #[test]
    fn pc_curve_round_trip() {
        let c = Curve::Pc(three_plateaus());
        let s = curve_to_string(&c).unwrap();
        assert!(s.starts_with("kind=pc,manifold=sphere:3\nx_right_end,c0,c1,c2\n"));
        assert_eq!(curve_from_str(&s).unwrap(), c);
    }

    #[test]
    fn column_count_is_enforced() {
        let s = "kind=pc,manifold=sphere:3\nx_right_end,c0,c1,c2\n1.0,1.0,0.0\n";
        assert!(matches!(curve_from_str(s), Err(Error::Parse(_))));
        let s = "kind=sampled,manifold=euclidean:1\nx,c0\n0,1\n1,2,3\n";
        assert!(matches!(curve_from_str(s), Err(Error::Parse(_))));
        let s = "kind=pc,manifold=euclidean:1\nx_right_end,c0\n0.5,1\n0.9,2\n";
        assert!(curve_from_str(s).is_err());
    }

    #[test]
    fn off_manifold_rows_are_rejected() {
        let s = "kind=pc,manifold=sphere:3\nx_right_end,c0,c1,c2\n1.0,1.0,1.0,0.0\n";
        assert!(curve_from_str(s).is_err());
    }

    #[test]
    fn trajectory_round_trip_is_bit_exact() {
        let tr = run_exact_pc(&three_plateaus(), 1.0, 1e-9).unwrap();
        let a = trajectory_to_string(&tr).unwrap();
        let d = diagnostics_to_string(&tr).unwrap();
        let back = trajectory_from_str(&a, &d).unwrap();
        assert_eq!(back.frames.len(), tr.frames.len());
        for (x, y) in back.frames.iter().zip(&tr.frames) {
            assert_eq!(x.t, y.t);
            assert_eq!(x.curve, y.curve);
            assert_eq!(x.diag, y.diag);
            assert_eq!(x.z, y.z);
        }
        assert_eq!(trajectory_to_string(&back).unwrap(), a);
    }

    #[test]
    fn sampled_trajectory_round_trip_through_files() {
        let u0 = crate::curve::mollify(&three_plateaus(), 21, 0.05).unwrap();
        let tr = run_regularized(&u0, &FlowConfig::new(S3, 1e-2, 21, 0.05).with_dt(1e-3)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (p, q) = (dir.path().join("traj.csv"), dir.path().join("diag.csv"));
        write_trajectory(&p, &q, &tr).unwrap();
        let back = read_trajectory(&p, &q).unwrap();
        assert_eq!(back.epsilon, Some(1e-2));
        for (x, y) in back.frames.iter().zip(&tr.frames) {
            assert_eq!(x.curve, y.curve);
            assert_eq!(x.diag, y.diag);
            assert!(x.z.is_some());
        }
    }

    #[test]
    fn mismatched_diagnostics_are_rejected() {
        let tr = run_exact_pc(&three_plateaus(), 1.0, 1e-9).unwrap();
        let a = trajectory_to_string(&tr).unwrap();
        let d = diagnostics_to_string(&tr).unwrap();
        let short: String = d.lines().take(3).map(|l| format!("{l}\n")).collect();
        assert!(matches!(trajectory_from_str(&a, &short), Err(Error::IncompatibleSnapshots(_))));
    }

    #[test]
    fn report_csv_layout() {
        let r = CheckReport::new("energy", 1e-9, 0.5, None, 1e-6);
        let s = reports_to_string(&[r]).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("check,pass,worst,at_t,at_x,tol"));
        assert!(lines.next().unwrap().starts_with("energy,true,"));
    }

    #[test]
    fn atomic_write_replaces_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        atomic_write(&p, b"one").unwrap();
        atomic_write(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    proptest! {
        #[test]
        fn seventeen_digits_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(parse_f64(&fmt_f64(x)).unwrap().to_bits(), x.to_bits());
        }

        #[test]
        fn sampled_curves_round_trip(vals in proptest::collection::vec(-1e3f64..1e3, 2..40)) {
            let m = ManifoldSpec::Euclidean(2);
            let flat: Vec<f64> = vals.iter().flat_map(|v| [*v, v * 0.5]).collect();
            let c = Curve::Sampled(SampledCurve::from_flat(m, flat).unwrap());
            prop_assert_eq!(curve_from_str(&curve_to_string(&c).unwrap()).unwrap(), c);
        }
    }
}

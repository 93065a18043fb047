//! Subcommand drivers. Each writes its reports under the output directory
//! and returns the written paths; reports are written before an analysis
//! failure is returned, flagged `"complete": false`.

use std::fs;
use std::path::{Path, PathBuf};

use matdist_core::classify::{classify, ClassificationReport, ClassifyError, FailedPoint};
use matdist_core::distributions::{grid_sweep, FiberDims, SweepEntry};
use matdist_core::foliation::{freeze_time_check, trace_leaf, FreezeTimeReport, LeafTrace};
use matdist_core::isomorph::{find_isomorphism, symmetry_algebra, transitivity_probe, IsoError};
use matdist_core::mat3::Mat3;
use matdist_core::remodel::{
    check_membership, classify_growth, density_rate_discrepancy, mass_consistency,
    velocity_gradient, GrowthReport, MassReport, MembershipReport, RemodelingProcess,
};
use serde::Serialize;

use crate::config::{point, Format, LawConfig, RunConfig};
use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    law: &'a LawConfig,
    complete: bool,
    #[serde(flatten)]
    body: T,
}

/// Files written by one command.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Written {
    pub files: Vec<PathBuf>,
}

struct Sink<'a> {
    cfg: &'a RunConfig,
    dir: PathBuf,
    written: Written,
}

impl<'a> Sink<'a> {
    fn new(cfg: &'a RunConfig) -> Result<Self, CliError> {
        let dir = cfg.out_dir();
        fs::create_dir_all(&dir).map_err(|source| io_err(&dir, source))?;
        Ok(Sink {
            cfg,
            dir,
            written: Written::default(),
        })
    }

    fn json<T: Serialize>(
        &mut self,
        name: &str,
        command: &str,
        complete: bool,
        body: T,
    ) -> Result<(), CliError> {
        if !self.cfg.output.wants(Format::Json) {
            return Ok(());
        }
        let env = Envelope {
            schema_version: SCHEMA_VERSION,
            command,
            law: &self.cfg.law,
            complete,
            body,
        };
        let mut text =
            serde_json::to_string_pretty(&env).map_err(|e| CliError::Serialize(e.to_string()))?;
        text.push('\n');
        self.put(name, text.as_bytes())
    }

    fn csv(
        &mut self,
        name: &str,
        fill: impl FnOnce(&mut Vec<u8>) -> Result<(), csv::Error>,
    ) -> Result<(), CliError> {
        if !self.cfg.output.wants(Format::Csv) {
            return Ok(());
        }
        let mut buf = Vec::new();
        fill(&mut buf).map_err(|e| CliError::Serialize(e.to_string()))?;
        self.put(name, &buf)
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|source| io_err(&path, source))?;
        log::info!("wrote {}", path.display());
        self.written.files.push(path);
        Ok(())
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn analysis<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Analysis(e.to_string())
}

const DIMS_HEADER: [&str; 12] = [
    "t",
    "x1",
    "x2",
    "x3",
    "dim_full",
    "dim_base",
    "dim_state_t",
    "dim_state_t_base",
    "dim_particle_x",
    "dim_particle_x_base",
    "dim_isotropy",
    "status",
];

fn write_dims_csv(out: &mut Vec<u8>, sweep: &[SweepEntry]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DIMS_HEADER)?;
    for entry in sweep {
        let (p, dims, status) = match entry {
            Ok(r) => {
                let d = &r.dims;
                let dims = [
                    d.dim_full,
                    d.dim_base,
                    d.dim_state_t,
                    d.dim_state_t_base,
                    d.dim_particle_x,
                    d.dim_particle_x_base,
                    d.dim_isotropy,
                ]
                .map(|v| v.to_string());
                (d.point, dims, "ok")
            }
            Err(f) => (f.point, Default::default(), "failed"),
        };
        let mut row: Vec<String> = p.coords().iter().map(|v| v.to_string()).collect();
        row.extend(dims);
        row.push(status.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct DimsRow {
    point: matdist_core::grid::BodyPoint,
    dims: Option<FiberDims>,
    error: Option<String>,
}

fn dims_rows(sweep: &[SweepEntry]) -> Vec<DimsRow> {
    sweep
        .iter()
        .map(|e| match e {
            Ok(r) => DimsRow {
                point: r.dims.point,
                dims: Some(r.dims.clone()),
                error: None,
            },
            Err(f) => DimsRow {
                point: f.point,
                dims: None,
                error: Some(f.error.to_string()),
            },
        })
        .collect()
}

fn failure_count(sweep: &[SweepEntry]) -> usize {
    sweep.iter().filter(|e| e.is_err()).count()
}

/// Fiber-dimension table over the grid.
pub fn cmd_dims(cfg: &RunConfig) -> Result<Written, CliError> {
    let law = cfg.law.build()?;
    let sweep = grid_sweep(law.as_ref(), &cfg.grid.grid(), &cfg.sampling);
    let failed = failure_count(&sweep);
    let mut sink = Sink::new(cfg)?;

    #[derive(Serialize)]
    struct Body<'a> {
        grid: &'a crate::config::GridConfig,
        sampling: &'a matdist_core::sampling::AnalysisConfig,
        rows: Vec<DimsRow>,
    }
    sink.json(
        "dims.json",
        "dims",
        failed == 0,
        Body {
            grid: &cfg.grid,
            sampling: &cfg.sampling,
            rows: dims_rows(&sweep),
        },
    )?;
    sink.csv("dims.csv", |out| write_dims_csv(out, &sweep))?;
    if failed > 0 {
        return Err(CliError::Analysis(format!(
            "{failed} of {} grid points failed; partial report written",
            sweep.len()
        )));
    }
    Ok(sink.written)
}

/// Classification verdicts over the grid.
pub fn cmd_classify(cfg: &RunConfig) -> Result<Written, CliError> {
    let law = cfg.law.build()?;
    let sweep = grid_sweep(law.as_ref(), &cfg.grid.grid(), &cfg.sampling);
    let mut sink = Sink::new(cfg)?;

    #[derive(Serialize)]
    struct Body {
        report: Option<ClassificationReport>,
        failed_points: Vec<FailedPoint>,
    }
    let (report, error) = match classify(&sweep, &cfg.sampling) {
        Ok(r) => (Some(r), None),
        Err(ClassifyError::IncompleteSweep { report }) => {
            (Some(*report), Some(failure_count(&sweep)))
        }
        Err(ClassifyError::EmptySweep) => (None, Some(sweep.len())),
    };
    let failed_points = sweep
        .iter()
        .filter_map(|e| e.as_ref().err())
        .map(|f| FailedPoint {
            point: f.point,
            error: f.error.to_string(),
        })
        .collect();
    sink.json(
        "classify.json",
        "classify",
        error.is_none(),
        Body {
            report,
            failed_points,
        },
    )?;
    sink.csv("classify.csv", |out| write_dims_csv(out, &sweep))?;
    match error {
        None => Ok(sink.written),
        Some(n) => Err(CliError::Analysis(format!(
            "{n} of {} grid points failed; partial report written",
            sweep.len()
        ))),
    }
}

#[derive(Serialize)]
#[serde(rename_all = "snake_case")]
enum IsoStatus {
    Found,
    NotFound,
    NonConverged,
    Failed,
}

#[derive(Serialize)]
struct IsoBody {
    from: matdist_core::grid::BodyPoint,
    to: matdist_core::grid::BodyPoint,
    status: IsoStatus,
    p: Option<Mat3>,
    residual: Option<f64>,
    inverse_residual: Option<f64>,
    iterations: Option<usize>,
    error: Option<String>,
    /// Linearized symmetry algebra at `from`, one row-major generator per element.
    symmetry_algebra: Option<Vec<[f64; 9]>>,
}

/// Isomorphism search between two point-instants, optionally with a grid probe.
pub fn cmd_isomorphism(cfg: &RunConfig) -> Result<Written, CliError> {
    let law = cfg.law.build()?;
    let iso = &cfg.isomorphism;
    let (from, to) = (point(iso.from), point(iso.to));
    let mut sink = Sink::new(cfg)?;

    let mut body = IsoBody {
        from,
        to,
        status: IsoStatus::Failed,
        p: None,
        residual: None,
        inverse_residual: None,
        iterations: None,
        error: None,
        symmetry_algebra: None,
    };
    let mut failure = None;
    match find_isomorphism(law.as_ref(), from, to, &cfg.sampling) {
        Ok(m) => {
            body.status = IsoStatus::Found;
            body.p = Some(m.p);
            body.residual = Some(m.residual);
            body.inverse_residual = Some(m.inverse_residual);
            body.iterations = Some(m.iterations);
        }
        Err(IsoError::NotFound {
            best_residual,
            best_p,
        }) => {
            body.status = IsoStatus::NotFound;
            body.residual = Some(best_residual).filter(|r| r.is_finite());
            body.p = Some(best_p);
        }
        Err(IsoError::NonConverged { residual, p }) => {
            body.status = IsoStatus::NonConverged;
            body.residual = Some(residual);
            body.p = Some(p);
        }
        Err(e @ IsoError::Law(_)) => {
            body.error = Some(e.to_string());
            failure = Some(e.to_string());
        }
    }
    if failure.is_none() {
        match symmetry_algebra(law.as_ref(), from, &cfg.sampling) {
            Ok(ns) => {
                body.symmetry_algebra = Some(
                    (0..ns.dim)
                        .map(|k| {
                            let mut a = [0.0; 9];
                            a.copy_from_slice(&ns.column(k));
                            a
                        })
                        .collect(),
                )
            }
            Err(e) => failure = Some(e.to_string()),
        }
    }
    sink.json("isomorphism.json", "isomorphism", failure.is_none(), body)?;

    if iso.probe {
        let evidence = transitivity_probe(law.as_ref(), &cfg.grid.grid(), &cfg.sampling);
        let complete = evidence
            .pairs
            .iter()
            .all(|p| p.status != matdist_core::isomorph::PairStatus::Failed);
        sink.json("transitivity.json", "isomorphism", complete, &evidence)?;
        sink.csv("transitivity.csv", |out| evidence.write_csv(out))?;
        if !complete && failure.is_none() {
            failure = Some("some grid pairs could not be probed".into());
        }
    }
    match failure {
        None => Ok(sink.written),
        Some(m) => Err(CliError::Analysis(m)),
    }
}

/// Leaf trace from the configured seed, optionally with the freeze-time check.
pub fn cmd_trace(cfg: &RunConfig) -> Result<Written, CliError> {
    let law = cfg.law.build()?;
    let t = &cfg.trace;
    let variant = t.leaf_variant()?;
    let seed = point(t.seed);
    let mut sink = Sink::new(cfg)?;

    #[derive(Serialize)]
    struct Body {
        trace: Option<LeafTrace>,
        freeze_time: Option<FreezeTimeReport>,
        error: Option<String>,
    }
    let mut body = Body {
        trace: None,
        freeze_time: None,
        error: None,
    };
    match trace_leaf(
        law.as_ref(),
        seed,
        variant,
        &t.directions,
        t.steps,
        t.step,
        &cfg.sampling,
    ) {
        Ok(tr) => body.trace = Some(tr),
        Err(e) => body.error = Some(e.to_string()),
    }
    if t.freeze_time && body.error.is_none() {
        match freeze_time_check(law.as_ref(), seed, t.steps, t.step, &cfg.sampling) {
            Ok(r) => body.freeze_time = Some(r),
            Err(e) => body.error = Some(format!("freeze-time check: {e}")),
        }
    }
    if let Some(tr) = &body.trace {
        sink.csv("trace.csv", |out| tr.write_csv(out))?;
    }
    let error = body.error.clone();
    sink.json("trace.json", "trace", error.is_none(), body)?;
    match error {
        None => Ok(sink.written),
        Some(m) => Err(CliError::Analysis(m)),
    }
}

/// Membership, mass consistency and growth analysis of a process CSV.
pub fn cmd_remodel(cfg: &RunConfig) -> Result<Written, CliError> {
    let law = cfg.law.build()?;
    let r = &cfg.remodel;
    let path = r
        .process
        .as_ref()
        .map(|p| cfg.resolve(p))
        .ok_or_else(|| CliError::Config("[remodel]: process is required".into()))?;
    let file = fs::File::open(&path).map_err(|source| io_err(&path, source))?;
    let process = RemodelingProcess::from_csv(file, r.particle, r.rho0)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;

    #[derive(Serialize)]
    struct Body {
        process: RemodelingProcess,
        membership: Option<MembershipReport>,
        mass: Option<MassReport>,
        velocity_gradient: Vec<Mat3>,
        growth: GrowthReport,
        density_rate_discrepancy: Option<f64>,
        error: Option<String>,
    }
    let velocity = velocity_gradient(&process).map_err(analysis)?;
    let growth = classify_growth(&process, r.tau_tr).map_err(analysis)?;
    let (membership, error) = match check_membership(law.as_ref(), &process, &cfg.sampling) {
        Ok(m) => (Some(m), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let has_rho = process.rho.is_some();
    let mass = if has_rho {
        Some(mass_consistency(&process, r.tau_mass).map_err(analysis)?)
    } else {
        None
    };
    let discrepancy = if has_rho {
        Some(density_rate_discrepancy(&process).map_err(analysis)?)
    } else {
        None
    };

    let mut sink = Sink::new(cfg)?;
    sink.csv("remodel.csv", |out| {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "t",
            "det_p",
            "trace_l",
            "membership_residual",
            "rho",
            "rho_predicted",
        ])?;
        for k in 0..process.len() {
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            w.write_record([
                process.times[k].to_string(),
                process.p[k].det().to_string(),
                growth.trace_l[k].to_string(),
                opt(membership.as_ref().map(|m| m.residuals[k])),
                opt(process.rho.as_ref().map(|r| r[k])),
                opt(mass.as_ref().map(|m| m.predicted[k])),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    sink.json(
        "remodel.json",
        "remodel",
        error.is_none(),
        Body {
            process,
            membership,
            mass,
            velocity_gradient: velocity,
            growth,
            density_rate_discrepancy: discrepancy,
            error: error.clone(),
        },
    )?;
    match error {
        None => Ok(sink.written),
        Some(m) => Err(CliError::Analysis(m)),
    }
}
